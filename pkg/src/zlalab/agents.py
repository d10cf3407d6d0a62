"""The three agent architectures: a recurrent speaker that emits one symbol
per step, a listener that predicts the input after reading the whole message,
and an eager listener variant that predicts after every symbol it reads.

Forwards come in two flavours: single-message functions matching the
conceptual signatures, and batched versions (suffix ``_batch``) that the
training loop and the analysis code use. Parameters are plain float64 arrays;
``tensors()`` exposes them as a flat name->array dict for the optimizer and
for checkpoints.

Message construction rule: the speaker samples symbols one at a time and a
message ends when the terminator is emitted. If the speaker has filled
``max_len - 1`` positions without terminating, the final position is set to
the terminator unconditionally; that position is not a policy choice, so it
contributes neither log-probability nor entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import numcore
from .errors import ConfigurationError
from .game import Alphabet, Language, Message
from .numcore import Array, LstmCellParams, LstmCache

SPEAKER_HIDDEN = 100
LISTENER_HIDDEN = 600
EMBED_DIM = 100


# ---------------------------------------------------------------------------
# parameters


@dataclass
class SpeakerParams:
    w_in: Array  # (n_inputs, hidden): maps an input rank to the initial hidden state
    b_in: Array  # (hidden,)
    cell: LstmCellParams  # emb_dim -> hidden
    emb: Array  # (voc_size, emb_dim): symbol embeddings, terminator row included
    sos: Array  # (emb_dim,): learned start-of-sequence embedding, first step input
    w_out: Array  # (hidden, voc_size)
    b_out: Array  # (voc_size,)

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[0]

    @property
    def voc_size(self) -> int:
        return self.emb.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_in.shape[1]

    def tensors(self, prefix: str = "speaker.") -> dict[str, Array]:
        return {
            prefix + "w_in": self.w_in,
            prefix + "b_in": self.b_in,
            prefix + "cell.w_x": self.cell.w_x,
            prefix + "cell.w_h": self.cell.w_h,
            prefix + "cell.b": self.cell.b,
            prefix + "emb": self.emb,
            prefix + "sos": self.sos,
            prefix + "w_out": self.w_out,
            prefix + "b_out": self.b_out,
        }


@dataclass
class ListenerParams:
    emb: Array  # (voc_size, emb_dim)
    cell: LstmCellParams  # emb_dim -> hidden
    w_out: Array  # (hidden, n_inputs): shared prediction head
    b_out: Array  # (n_inputs,)

    @property
    def n_inputs(self) -> int:
        return self.w_out.shape[1]

    @property
    def voc_size(self) -> int:
        return self.emb.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_out.shape[0]

    def tensors(self, prefix: str = "listener.") -> dict[str, Array]:
        return {
            prefix + "emb": self.emb,
            prefix + "cell.w_x": self.cell.w_x,
            prefix + "cell.w_h": self.cell.w_h,
            prefix + "cell.b": self.cell.b,
            prefix + "w_out": self.w_out,
            prefix + "b_out": self.b_out,
        }


def init_speaker(
    rng: np.random.Generator,
    n_inputs: int,
    voc_size: int,
    hidden: int = SPEAKER_HIDDEN,
    emb_dim: int = EMBED_DIM,
) -> SpeakerParams:
    return SpeakerParams(
        w_in=numcore.uniform_init(rng, (n_inputs, hidden), n_inputs),
        b_in=numcore.uniform_init(rng, (hidden,), n_inputs),
        cell=numcore.lstm_init(rng, emb_dim, hidden),
        emb=numcore.uniform_init(rng, (voc_size, emb_dim), emb_dim),
        sos=numcore.uniform_init(rng, (emb_dim,), emb_dim),
        w_out=numcore.uniform_init(rng, (hidden, voc_size), hidden),
        b_out=numcore.uniform_init(rng, (voc_size,), hidden),
    )


def init_listener(
    rng: np.random.Generator,
    n_inputs: int,
    voc_size: int,
    hidden: int = LISTENER_HIDDEN,
    emb_dim: int = EMBED_DIM,
) -> ListenerParams:
    return ListenerParams(
        emb=numcore.uniform_init(rng, (voc_size, emb_dim), emb_dim),
        cell=numcore.lstm_init(rng, emb_dim, hidden),
        w_out=numcore.uniform_init(rng, (hidden, n_inputs), hidden),
        b_out=numcore.uniform_init(rng, (n_inputs,), hidden),
    )


def zero_grads(params: dict[str, Array]) -> dict[str, Array]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def flatten_parameters(speaker: SpeakerParams, listener: ListenerParams):
    """Repack both agents' tensors as views into one contiguous buffer.

    The agents keep working as before (their attributes are rebound to the
    views), while the optimizer can update every parameter with a handful of
    vector operations on the flat buffer. Returns (flat, tensor_view_dict).
    """
    tensors = {**speaker.tensors(), **listener.tensors()}
    total = sum(v.size for v in tensors.values())
    flat = np.empty(total)
    views: dict[str, Array] = {}
    offset = 0
    for key, value in tensors.items():
        view = flat[offset : offset + value.size].reshape(value.shape)
        view[...] = value
        views[key] = view
        offset += value.size

    def rebind(obj, prefix):
        obj.cell = LstmCellParams(
            views[prefix + "cell.w_x"], views[prefix + "cell.w_h"], views[prefix + "cell.b"]
        )
        for name in ("emb", "w_out", "b_out"):
            setattr(obj, name, views[prefix + name])

    rebind(speaker, "speaker.")
    speaker.w_in = views["speaker.w_in"]
    speaker.b_in = views["speaker.b_in"]
    speaker.sos = views["speaker.sos"]
    rebind(listener, "listener.")
    return flat, views


def flatten_grads(grads: dict[str, Array], order: dict[str, Array]) -> Array:
    """Concatenate a gradient dict into one vector, in the order's key order."""
    return np.concatenate([grads[k].ravel() for k in order])


# ---------------------------------------------------------------------------
# speaker rollout


@dataclass
class SpeakerRollout:
    """A batch of generated messages plus everything backward needs.

    ``symbols`` is padded with the terminator beyond each row's length.
    ``n_sampled[b]`` counts the policy-sampled positions of row b (its length
    minus one when the terminator was forced at the last position).
    ``probs[t]`` holds the full categorical distribution of step t; rows that
    had already terminated are kept for shape but masked by ``active``.
    """

    ranks: Array  # (B,) int, 1-indexed
    symbols: Array  # (B, T_pad) int
    lengths: Array  # (B,) int, terminator included
    n_sampled: Array  # (B,) int
    logp: Array  # (B,) total log-probability of the sampled path
    step_logp: Array  # (B, S) per-step log-prob of the chosen symbol (0 when inactive)
    entropy: Array  # (B,) mean per-sampled-step entropy (0 when no step was sampled)
    probs: Array  # (S, B, V)
    h_steps: Array  # (S, B, hidden)
    active: Array  # (S, B) bool
    caches: list[LstmCache]

    def message(self, b: int = 0) -> Message:
        return tuple(int(s) for s in self.symbols[b, : self.lengths[b]])

    def messages(self) -> list[Message]:
        return [self.message(b) for b in range(len(self.ranks))]


def _categorical_rows(probs: Array, u: Array) -> Array:
    cdf = np.cumsum(probs, axis=1)
    idx = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def speaker_rollout_batch(
    params: SpeakerParams,
    alphabet: Alphabet,
    ranks: Array,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
    forced_symbols: Array | None = None,
) -> SpeakerRollout:
    """Generate one message per rank.

    mode 'sample' draws each symbol from the categorical output, 'greedy'
    takes the argmax, and 'replay' walks a given ``forced_symbols`` path
    (shape (B, T)) scoring it under the current parameters.
    """
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    if mode == "replay" and forced_symbols is None:
        raise ValueError("replay mode needs forced_symbols")
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.min(initial=1) < 1 or ranks.max(initial=1) > params.n_inputs:
        raise ValueError("input rank outside 1..n_inputs")
    B = ranks.shape[0]
    V = params.voc_size
    eos = alphabet.eos
    max_steps = alphabet.max_len - 1

    h = params.w_in[ranks - 1] + params.b_in
    c = np.zeros_like(h)
    x = np.broadcast_to(params.sos, (B, params.sos.shape[0])).copy()

    alive = np.ones(B, dtype=bool)
    sym_rows: list[Array] = []
    active_rows: list[Array] = []
    probs_rows: list[Array] = []
    h_rows: list[Array] = []
    caches: list[LstmCache] = []
    step_logp_rows: list[Array] = []
    ent_sum = np.zeros(B)
    logp = np.zeros(B)

    t = 0
    while t < max_steps and alive.any():
        h, c, cache = numcore.lstm_cell_forward(params.cell, x, h, c)
        logits = h @ params.w_out + params.b_out
        logp_t = numcore.log_softmax(logits)
        p = np.exp(logp_t)
        if mode == "sample":
            sym = _categorical_rows(p, rng.random(B))
        elif mode == "greedy":
            sym = np.argmax(p, axis=1)
        elif mode == "replay":
            sym = forced_symbols[:, t].astype(np.int64)
        else:
            raise ValueError(f"unknown rollout mode {mode!r}")
        sym = np.where(alive, sym, eos)

        chosen_logp = np.where(alive, logp_t[np.arange(B), sym], 0.0)
        logp += chosen_logp
        ent_sum += np.where(alive, numcore.entropy_from_probs(p), 0.0)

        sym_rows.append(sym)
        step_logp_rows.append(chosen_logp)
        active_rows.append(alive.copy())
        probs_rows.append(p)
        h_rows.append(h)
        caches.append(cache)

        alive = alive & (sym != eos)
        x = params.emb[sym]
        t += 1

    S = len(sym_rows)
    active = np.array(active_rows) if S else np.zeros((0, B), dtype=bool)
    n_sampled = active.sum(axis=0).astype(np.int64)
    # rows still alive never emitted the terminator: it is forced at the next position
    lengths = n_sampled + alive.astype(np.int64)

    T_pad = int(lengths.max()) if B else 0
    symbols = np.full((B, T_pad), eos, dtype=np.int64)
    for t, sym in enumerate(sym_rows):
        symbols[active[t], t] = sym[active[t]]

    ns = np.maximum(n_sampled, 1)
    entropy = np.where(n_sampled > 0, ent_sum / ns, 0.0)

    return SpeakerRollout(
        ranks=ranks,
        symbols=symbols,
        lengths=lengths,
        n_sampled=n_sampled,
        logp=logp,
        step_logp=np.array(step_logp_rows).reshape(S, B).T if S else np.zeros((B, 0)),
        entropy=entropy,
        probs=np.array(probs_rows) if S else np.zeros((0, B, V)),
        h_steps=np.array(h_rows) if S else np.zeros((0, B, params.hidden)),
        active=active,
        caches=caches,
    )


def speaker_rollout(
    params: SpeakerParams,
    alphabet: Alphabet,
    input_rank: int,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
) -> SpeakerRollout:
    """Single-input rollout; see :func:`speaker_rollout_batch`."""
    return speaker_rollout_batch(params, alphabet, np.array([input_rank]), mode, rng)


def speaker_replay(
    params: SpeakerParams, alphabet: Alphabet, ranks: Array, messages: list[Message]
) -> SpeakerRollout:
    """Score fixed messages under the current policy (teacher forcing)."""
    T = max(len(m) for m in messages)
    forced = np.full((len(messages), T), alphabet.eos, dtype=np.int64)
    for b, m in enumerate(messages):
        forced[b, : len(m)] = m
    return speaker_rollout_batch(params, alphabet, ranks, "replay", forced_symbols=forced)


def speaker_backward(
    params: SpeakerParams, rollout: SpeakerRollout, grad_logits_steps: Array
) -> dict[str, Array]:
    """Backpropagate per-step output-logit gradients through the rollout.

    ``grad_logits_steps`` has shape (S, B, V) and must already be zero for
    inactive (row, step) pairs. Returns gradients keyed like ``tensors()``.
    """
    grads = zero_grads(params.tensors())
    S = rollout.probs.shape[0]
    if S == 0:
        return grads
    B = rollout.ranks.shape[0]
    H = params.hidden

    # head gradients and per-step hidden-state injections in two fused matmuls
    gl_flat = grad_logits_steps.reshape(S * B, -1)
    grads["speaker.w_out"] += rollout.h_steps.reshape(S * B, H).T @ gl_flat
    grads["speaker.b_out"] += gl_flat.sum(axis=0)
    gh_inject = grad_logits_steps @ params.w_out.T  # (S, B, H)

    gx_steps = np.empty((S, B, params.emb.shape[1]))
    gh_next = np.zeros((B, H))
    gc_next = np.zeros((B, H))
    for t in range(S - 1, -1, -1):
        gh = gh_inject[t] + gh_next
        gcell, gx, gh_prev, gc_prev = numcore.lstm_cell_backward(rollout.caches[t], gh, gc_next)
        grads["speaker.cell.w_x"] += gcell.w_x
        grads["speaker.cell.w_h"] += gcell.w_h
        grads["speaker.cell.b"] += gcell.b
        gx_steps[t] = gx
        if t == 0:
            np.add.at(grads["speaker.w_in"], rollout.ranks - 1, gh_prev)
            grads["speaker.b_in"] += gh_prev.sum(axis=0)
        else:
            gh_next, gc_next = gh_prev, gc_prev

    grads["speaker.sos"] += gx_steps[0].sum(axis=0)
    if S > 1:
        # one coalesced scatter for all previously-emitted-symbol embeddings
        np.add.at(
            grads["speaker.emb"],
            rollout.symbols[:, : S - 1].T.reshape(-1),
            gx_steps[1:].reshape((S - 1) * B, -1),
        )
    return grads


# ---------------------------------------------------------------------------
# listeners


@dataclass
class ListenerBatch:
    """Forward pass of the listener LSTM over a padded message batch.

    ``logp_final`` is the log-distribution read off at each row's terminator
    position. When the forward ran in eager (per-position) mode,
    ``logp_steps[t]`` holds the log-distribution after consuming symbol t
    (meaningful only where ``t < lengths``).
    """

    symbols: Array  # (B, T) int
    lengths: Array  # (B,) int
    h_steps: Array  # (T, B, hidden)
    caches: list[LstmCache]
    logp_final: Array  # (B, n_inputs)
    logp_steps: Array | None  # (T, B, n_inputs) or None


def _pad_messages(messages: list[Message], eos: int) -> tuple[Array, Array]:
    lengths = np.array([len(m) for m in messages], dtype=np.int64)
    out = np.full((len(messages), int(lengths.max())), eos, dtype=np.int64)
    for b, m in enumerate(messages):
        out[b, : len(m)] = m
    return out, lengths


def listener_forward_batch(
    params: ListenerParams,
    symbols: Array,
    lengths: Array,
    per_position: bool,
) -> ListenerBatch:
    """Consume messages symbol by symbol (terminator included).

    With ``per_position`` the shared head is applied after every step; the
    prediction at a position only ever depends on the prefix up to it.
    """
    B, T = symbols.shape
    h = np.zeros((B, params.hidden))
    c = np.zeros_like(h)
    h_rows, caches = [], []
    for t in range(T):
        x = params.emb[symbols[:, t]]
        h, c, cache = numcore.lstm_cell_forward(params.cell, x, h, c)
        h_rows.append(h)
        caches.append(cache)
    h_steps = np.array(h_rows)
    idx = lengths - 1
    if per_position:
        # one fused matmul for the shared head over every position
        logits = h_steps.reshape(T * B, -1) @ params.w_out + params.b_out
        logp_steps = numcore.log_softmax(logits).reshape(T, B, -1)
        logp_final = logp_steps[idx, np.arange(B)]
    else:
        logp_steps = None
        h_final = h_steps[idx, np.arange(B)]
        logp_final = numcore.log_softmax(h_final @ params.w_out + params.b_out)
    return ListenerBatch(symbols, lengths, h_steps, caches, logp_final, logp_steps)


def standard_listener_forward(params: ListenerParams, m: Message):
    """Distribution over inputs from the hidden state after the terminator."""
    symbols, lengths = _pad_messages([m], m[-1])
    batch = listener_forward_batch(params, symbols, lengths, per_position=False)
    return np.exp(batch.logp_final[0]), batch


def impatient_listener_forward(params: ListenerParams, m: Message):
    """One distribution per consumed symbol, terminator position included."""
    symbols, lengths = _pad_messages([m], m[-1])
    batch = listener_forward_batch(params, symbols, lengths, per_position=True)
    return np.exp(batch.logp_steps[: len(m), 0]), batch


def listener_backward(
    params: ListenerParams,
    batch: ListenerBatch,
    grad_logits_final: Array | None = None,
    grad_logits_steps: Array | None = None,
) -> dict[str, Array]:
    """Backpropagate head-logit gradients through the listener.

    ``grad_logits_final`` (B, n_inputs) injects at each row's terminator
    position; ``grad_logits_steps`` (T, B, n_inputs) injects per position and
    must be zero beyond each row's length. Either or both may be given.
    """
    grads = zero_grads(params.tensors())
    T, B, H = batch.h_steps.shape

    if grad_logits_steps is not None:
        gl_flat = grad_logits_steps.reshape(T * B, -1)
        grads["listener.w_out"] += batch.h_steps.reshape(T * B, H).T @ gl_flat
        grads["listener.b_out"] += gl_flat.sum(axis=0)
        grad_h_inject = grad_logits_steps @ params.w_out.T  # (T, B, H)
    else:
        grad_h_inject = np.zeros((T, B, H))
    if grad_logits_final is not None:
        idx = batch.lengths - 1
        h_final = batch.h_steps[idx, np.arange(B)]
        grads["listener.w_out"] += h_final.T @ grad_logits_final
        grads["listener.b_out"] += grad_logits_final.sum(axis=0)
        gh_final = grad_logits_final @ params.w_out.T
        np.add.at(grad_h_inject, (idx, np.arange(B)), gh_final)

    gx_steps = np.empty((T, B, params.emb.shape[1]))
    gh_next = np.zeros((B, H))
    gc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        gh = grad_h_inject[t] + gh_next
        gcell, gx, gh_prev, gc_prev = numcore.lstm_cell_backward(batch.caches[t], gh, gc_next)
        grads["listener.cell.w_x"] += gcell.w_x
        grads["listener.cell.w_h"] += gcell.w_h
        grads["listener.cell.b"] += gcell.b
        gx_steps[t] = gx
        gh_next, gc_next = gh_prev, gc_prev
    np.add.at(grads["listener.emb"], batch.symbols.T.reshape(-1), gx_steps.reshape(T * B, -1))
    return grads


# ---------------------------------------------------------------------------
# test-time prediction


def predict_ranks(params: ListenerParams, messages: list[Message], eos: int = 0) -> Array:
    """Argmax prediction at the terminator position, as 1-indexed ranks.

    This is the test-time rule for both listener variants: the eager
    listener's prediction when it reads the terminator coincides with the
    plain listener's final prediction under the same weights.
    """
    symbols, lengths = _pad_messages(messages, eos)
    batch = listener_forward_batch(params, symbols, lengths, per_position=False)
    return np.argmax(batch.logp_final, axis=1) + 1


def listener_test_prediction(system: str, params: ListenerParams, m: Message) -> int:
    """Predicted input rank for one message under either listener variant."""
    if system not in ("standard", "impatient"):
        raise ValueError(f"unknown listener system {system!r}")
    return int(predict_ranks(params, [m])[0])


def make_predictor(params: ListenerParams, eos: int = 0):
    """Message -> predicted rank callable, for the analysis code."""

    def predict(messages: list[Message]) -> Array:
        return predict_ranks(params, messages, eos)

    return predict


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, speaker: SpeakerParams, listener: ListenerParams, meta: dict | None = None) -> None:
    """Write all parameter tensors plus a JSON metadata blob to an .npz file."""
    tensors = {**speaker.tensors(), **listener.tensors()}
    tensors["meta"] = np.array(json.dumps(meta or {}))
    np.savez(path, **tensors)


def load_checkpoint(path) -> tuple[SpeakerParams, ListenerParams, dict]:
    with np.load(path) as z:
        t = {k: z[k] for k in z.files}
    meta = json.loads(str(t.pop("meta")))
    speaker = SpeakerParams(
        w_in=t["speaker.w_in"],
        b_in=t["speaker.b_in"],
        cell=LstmCellParams(t["speaker.cell.w_x"], t["speaker.cell.w_h"], t["speaker.cell.b"]),
        emb=t["speaker.emb"],
        sos=t["speaker.sos"],
        w_out=t["speaker.w_out"],
        b_out=t["speaker.b_out"],
    )
    listener = ListenerParams(
        emb=t["listener.emb"],
        cell=LstmCellParams(t["listener.cell.w_x"], t["listener.cell.w_h"], t["listener.cell.b"]),
        w_out=t["listener.w_out"],
        b_out=t["listener.b_out"],
    )
    return speaker, listener, meta


def greedy_language(
    speaker: SpeakerParams, alphabet: Alphabet, probs: Array, batch_size: int = 256
) -> Language:
    """Greedy-decode every input rank into its message."""
    n = speaker.n_inputs
    messages: list[Message] = []
    for start in range(1, n + 1, batch_size):
        ranks = np.arange(start, min(start + batch_size, n + 1))
        roll = speaker_rollout_batch(speaker, alphabet, ranks, mode="greedy")
        messages.extend(roll.messages())
    return Language(alphabet, messages, probs)
