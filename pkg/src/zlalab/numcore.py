"""Minimal dense float64 kernel: linear maps, an LSTM cell, softmax
cross-entropy and Adam, each with an exact analytic backward pass.

Everything here is a pure function over explicit state. Parameters live in
plain numpy arrays; every forward returns the cache its backward needs, so
there is no autograd tape. All inputs accept either a single vector ``(d,)``
or a batch ``(B, d)``; backward shapes mirror forward shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError

Array = np.ndarray


def sigmoid(x: Array) -> Array:
    # tanh form: overflow-free and a single transcendental pass
    out = np.multiply(x, 0.5)
    np.tanh(out, out=out)
    out += 1.0
    out *= 0.5
    return out


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Array:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], the usual recurrent-net default."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------------------
# linear layer


def linear_forward(w: Array, b: Array, x: Array):
    """y = x @ w + b with w of shape (d_in, d_out). Returns (y, cache)."""
    if x.shape[-1] != w.shape[0]:
        raise ConfigurationError(
            f"linear: input dim {x.shape[-1]} does not match weight dim {w.shape[0]}"
        )
    return x @ w + b, x


def linear_backward(w: Array, cache: Array, grad_y: Array):
    """Returns (grad_w, grad_b, grad_x) for a linear_forward call."""
    x = cache
    x2 = x.reshape(-1, x.shape[-1])
    g2 = grad_y.reshape(-1, grad_y.shape[-1])
    grad_w = x2.T @ g2
    grad_b = g2.sum(axis=0)
    grad_x = grad_y @ w.T
    return grad_w, grad_b, grad_x


# ---------------------------------------------------------------------------
# LSTM cell


GATE_ORDER = ("input", "forget", "output", "candidate")


@dataclass
class LstmCellParams:
    """Gate parameters of a single LSTM cell.

    The four gate blocks — input, forget, output, candidate, in that column
    order — are stored fused: ``w_x`` is (d_in, 4*d_h), ``w_h`` is
    (d_h, 4*d_h) and ``b`` is (4*d_h,). The three sigmoid gates sit first so
    one vectorized call covers them. ``gate(name)`` slices one block out.
    """

    w_x: Array
    w_h: Array
    b: Array

    @property
    def d_in(self) -> int:
        return self.w_x.shape[0]

    @property
    def d_h(self) -> int:
        return self.w_h.shape[0]

    def validate(self) -> None:
        h = self.d_h
        if self.w_x.shape != (self.d_in, 4 * h) or self.w_h.shape != (h, 4 * h) or self.b.shape != (4 * h,):
            raise ConfigurationError(
                f"inconsistent LSTM shapes: w_x {self.w_x.shape}, w_h {self.w_h.shape}, b {self.b.shape}"
            )

    def gate(self, name: str):
        """(w_x, w_h, b) block for one of 'input', 'forget', 'output', 'candidate'."""
        idx = GATE_ORDER.index(name)
        h = self.d_h
        sl = slice(idx * h, (idx + 1) * h)
        return self.w_x[:, sl], self.w_h[:, sl], self.b[sl]

    def zeros_like(self) -> "LstmCellParams":
        return LstmCellParams(np.zeros_like(self.w_x), np.zeros_like(self.w_h), np.zeros_like(self.b))


def lstm_init(rng: np.random.Generator, d_in: int, d_h: int) -> LstmCellParams:
    return LstmCellParams(
        w_x=uniform_init(rng, (d_in, 4 * d_h), d_in),
        w_h=uniform_init(rng, (d_h, 4 * d_h), d_h),
        b=uniform_init(rng, (4 * d_h,), d_h),
    )


@dataclass
class LstmCache:
    params: LstmCellParams
    x: Array
    h_prev: Array
    c_prev: Array
    i: Array
    f: Array
    g: Array
    o: Array
    c: Array
    tanh_c: Array


def lstm_cell_forward(params: LstmCellParams, x: Array, h_prev: Array, c_prev: Array):
    """One LSTM step (sigmoid gates, tanh candidate). Returns (h, c, cache)."""
    squeeze = x.ndim == 1
    if squeeze:
        x, h_prev, c_prev = x[None, :], h_prev[None, :], c_prev[None, :]
    if x.shape[-1] != params.d_in or h_prev.shape[-1] != params.d_h:
        raise ConfigurationError(
            f"lstm: got x dim {x.shape[-1]}, h dim {h_prev.shape[-1]}; "
            f"cell expects {params.d_in} -> {params.d_h}"
        )
    d_h = params.d_h
    z = x @ params.w_x
    z += h_prev @ params.w_h
    z += params.b
    gates = sigmoid(z[:, : 3 * d_h])
    i = gates[:, :d_h]
    f = gates[:, d_h : 2 * d_h]
    o = gates[:, 2 * d_h :]
    g = np.tanh(z[:, 3 * d_h :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = LstmCache(params, x, h_prev, c_prev, i, f, g, o, c, tanh_c)
    if squeeze:
        return h[0], c[0], cache
    return h, c, cache


def lstm_cell_backward(cache: LstmCache, grad_h: Array, grad_c: Array):
    """Exact gradients of one LSTM step.

    Returns (grad_params, grad_x, grad_h_prev, grad_c_prev) where grad_params
    is an LstmCellParams holding the parameter gradients.
    """
    squeeze = grad_h.ndim == 1
    if squeeze:
        grad_h, grad_c = grad_h[None, :], grad_c[None, :]
    if grad_h.shape != cache.i.shape:
        raise RuntimeError(
            f"lstm backward: grad shape {grad_h.shape} does not match cache {cache.i.shape}"
        )
    p = cache.params
    i, f, g, o = cache.i, cache.f, cache.g, cache.o
    d_h = p.d_h
    tanh_c = cache.tanh_c

    dc = 1.0 - tanh_c * tanh_c
    dc *= grad_h * o
    dc += grad_c
    grad_c_prev = dc * f

    dz = np.empty((grad_h.shape[0], 4 * d_h))
    np.multiply(dc * g, i * (1.0 - i), out=dz[:, :d_h])
    np.multiply(dc * cache.c_prev, f * (1.0 - f), out=dz[:, d_h : 2 * d_h])
    np.multiply(grad_h * tanh_c, o * (1.0 - o), out=dz[:, 2 * d_h : 3 * d_h])
    np.multiply(dc * i, 1.0 - g * g, out=dz[:, 3 * d_h :])

    grad = LstmCellParams(cache.x.T @ dz, cache.h_prev.T @ dz, dz.sum(axis=0))
    grad_x = dz @ p.w_x.T
    grad_h_prev = dz @ p.w_h.T
    if squeeze:
        return grad, grad_x[0], grad_h_prev[0], grad_c_prev[0]
    return grad, grad_x, grad_h_prev, grad_c_prev


# ---------------------------------------------------------------------------
# softmax / cross-entropy / entropy


def log_softmax(logits: Array) -> Array:
    """Row-wise log softmax, stabilized by max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: Array) -> Array:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: Array, target_index: int):
    """Cross-entropy of softmax(logits) against a one-hot target.

    Returns (loss, probs, grad_logits) with grad = probs - onehot(target).
    """
    if logits.ndim != 1 or logits.size == 0:
        raise ConfigurationError("softmax_xent expects a nonempty 1-d logits vector")
    if not 0 <= target_index < logits.size:
        raise ValueError(f"target index {target_index} outside logits of length {logits.size}")
    logp = log_softmax(logits)
    probs = np.exp(logp)
    loss = -logp[target_index]
    grad = probs.copy()
    grad[target_index] -= 1.0
    return loss, probs, grad


def entropy_from_probs(probs: Array) -> Array:
    """Shannon entropy (nats) along the last axis; 0 log 0 := 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -plogp.sum(axis=-1)


def entropy_grad_logits(probs: Array, entropy: Array) -> Array:
    """d entropy / d logits = -p * (log p + H), row-wise."""
    with np.errstate(divide="ignore"):
        logp = np.where(probs > 0.0, np.log(probs), 0.0)
    return -probs * (logp + np.asarray(entropy)[..., None])


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-tensor first/second moment accumulators plus the shared step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, Array] | None = None
    v: dict[str, Array] | None = None

    def _ensure(self, params: dict[str, Array]) -> None:
        if self.m is None:
            self.m = {k: np.zeros_like(p) for k, p in params.items()}
            self.v = {k: np.zeros_like(p) for k, p in params.items()}


def adam_step(state: AdamState, params: dict[str, Array], grads: dict[str, Array]) -> dict[str, Array]:
    """One Adam update with bias correction; mutates params in place and returns them."""
    state._ensure(params)
    for k, g in grads.items():
        if params[k].shape != g.shape:
            raise ConfigurationError(f"adam: gradient shape {g.shape} != param shape {params[k].shape} for '{k}'")
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in tensor '{k}' at step {state.step + 1}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[k] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params
