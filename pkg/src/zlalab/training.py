"""Losses, the adaptive length-penalty schedule, the hybrid
score-function/backprop gradient estimator, and the training loop.

Four agent systems are supported:

=====================  ==============  =================
system                 length penalty  listener variant
=====================  ==============  =================
``standard``           no              plain
``lazy+standard``      yes             plain
``standard+impatient`` no              per-position
``lazimpa``            yes             per-position
=====================  ==============  =================

The speaker is trained with a score-function estimator (advantage = total
task loss minus a running-mean baseline) plus an analytic entropy bonus; the
listener is trained by ordinary backpropagation through its cross-entropy.
Both parameter sets are updated by one joint Adam step per batch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np

from . import agents, numcore
from .errors import ConfigurationError, DivergenceError
from .game import Alphabet, InputSpace, Language, Message, sample_inputs

SYSTEMS = ("standard", "lazy+standard", "standard+impatient", "lazimpa")


@dataclass
class TrainConfig:
    system: str = "lazimpa"
    n_inputs: int = 1000
    voc_size: int = 40
    max_len: int = 30
    distribution: str = "powerlaw"
    epochs: int = 1500
    batches_per_epoch: int = 100
    batch_size: int = 512
    lr: float = 0.001
    entropy_coeff: float = 2.0
    sched_beta1: float = 45.0
    sched_beta2: float = 10.0
    seed: int = 0
    success_threshold: float = 0.97
    speaker_hidden: int = agents.SPEAKER_HIDDEN
    listener_hidden: int = agents.LISTENER_HIDDEN
    emb_dim: int = agents.EMBED_DIM
    acc_ema_decay: float = 0.95

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigurationError(f"unknown system {self.system!r}; expected one of {SYSTEMS}")
        for name in ("n_inputs", "voc_size", "max_len", "epochs", "batches_per_epoch",
                     "batch_size", "speaker_hidden", "listener_hidden", "emb_dim"):
            if getattr(self, name) < (0 if name == "epochs" else 1):
                raise ConfigurationError(f"{name} must be positive")
        if not 0.0 < self.success_threshold < 1.0:
            raise ConfigurationError("success threshold must lie in (0, 1)")

    @property
    def impatient(self) -> bool:
        return self.system in ("standard+impatient", "lazimpa")

    @property
    def lazy(self) -> bool:
        return self.system in ("lazy+standard", "lazimpa")

    def alphabet(self) -> Alphabet:
        return Alphabet(self.voc_size, self.max_len)

    def input_space(self) -> InputSpace:
        return InputSpace(self.n_inputs, self.distribution)


# ---------------------------------------------------------------------------
# losses and schedule


def loss_standard(rank: int, final_distribution: np.ndarray) -> float:
    """Cross-entropy of the listener's final distribution against the true rank."""
    p = float(np.clip(final_distribution[rank - 1], 1e-300, None))
    return -np.log(p)


def loss_impatience(rank: int, distributions: np.ndarray) -> float:
    """Mean cross-entropy over every per-position distribution (terminator included)."""
    d = np.asarray(distributions)
    if d.ndim != 2 or d.shape[0] < 1:
        raise ValueError("need at least one per-position distribution")
    p = np.clip(d[:, rank - 1], 1e-300, None)
    return float(-np.log(p).mean())


def alpha_schedule(acc: float, beta1: float = 45.0, beta2: float = 10.0) -> float:
    """Length-penalty coefficient acc**beta1 / beta2: negligible while accuracy
    is low (exploration), rising steeply as communication becomes reliable
    (reduction)."""
    if not 0.0 <= acc <= 1.0:
        warnings.warn(f"accuracy estimate {acc} outside [0, 1]; clamping")
        acc = min(max(acc, 0.0), 1.0)
    return acc**beta1 / beta2


def loss_laziness(m: Message | int, acc: float, beta1: float = 45.0, beta2: float = 10.0) -> float:
    """Adaptive per-message length penalty: alpha(acc) * l(m)."""
    length = m if isinstance(m, (int, np.integer)) else len(m)
    return alpha_schedule(acc, beta1, beta2) * float(length)


def per_sample_surrogate(
    system: str,
    task_loss: float,
    length_penalty: float,
    logp: float,
    mean_entropy: float,
    baseline: float,
    entropy_coeff: float,
) -> float:
    """Scalar whose gradient is the per-sample training estimate.

    The task term carries gradients into the listener only; the
    ``(total - baseline) * logp`` term carries them into the speaker only
    (the advantage is treated as a constant); the entropy bonus is analytic
    in the speaker's distributions. ``system`` is accepted for symmetry with
    the loss selection but the decomposition is identical across systems.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    total = task_loss + length_penalty
    return total + (total - baseline) * logp - entropy_coeff * mean_entropy


@dataclass
class Baseline:
    """Count-weighted running mean of batch-mean losses."""

    mean: float = 0.0
    count: int = 0

    @property
    def value(self) -> float:
        return self.mean

    def update(self, batch_mean_loss: float) -> float:
        if not np.isfinite(batch_mean_loss):
            raise DivergenceError("non-finite batch loss fed to the baseline")
        self.count += 1
        self.mean += (batch_mean_loss - self.mean) / self.count
        return self.mean


def update_baseline(b: Baseline, batch_mean_loss: float) -> float:
    return b.update(batch_mean_loss)


@dataclass
class AccuracyTracker:
    """Exponential moving average of per-batch frequency-weighted accuracy.

    Batches are sampled from the input distribution, so the plain fraction of
    correct predictions within a batch is already frequency-weighted. The EMA
    starts at zero, which keeps the length penalty off at the start of
    training.
    """

    decay: float = 0.95
    value: float = 0.0

    def update(self, batch_accuracy: float) -> float:
        if not 0.0 <= batch_accuracy <= 1.0:
            raise ValueError("batch accuracy must lie in [0, 1]")
        self.value = self.decay * self.value + (1.0 - self.decay) * batch_accuracy
        return self.value


# ---------------------------------------------------------------------------
# run trace


@dataclass
class RunTrace:
    """Per-epoch series of one training run plus its final state."""

    config: TrainConfig
    uniform_acc: np.ndarray
    weighted_acc_ema: np.ndarray
    mean_length: np.ndarray
    mean_loss: np.ndarray
    mean_task_loss: np.ndarray
    mean_length_penalty: np.ndarray
    mean_entropy: np.ndarray
    language: Language
    speaker: agents.SpeakerParams
    listener: agents.ListenerParams

    @property
    def epochs_run(self) -> int:
        return int(self.uniform_acc.size)

    @property
    def success(self) -> bool:
        return self.epochs_run > 0 and float(self.uniform_acc[-1]) > self.config.success_threshold

    def summary(self) -> dict:
        last = lambda a: float(a[-1]) if a.size else None
        return {
            "system": self.config.system,
            "seed": self.config.seed,
            "epochs_run": self.epochs_run,
            "success": self.success,
            "final_uniform_accuracy": last(self.uniform_acc),
            "final_weighted_acc_ema": last(self.weighted_acc_ema),
            "final_mean_length": last(self.mean_length),
            "final_mean_loss": last(self.mean_loss),
            "config": asdict(self.config),
        }


TRACE_COLUMNS = ("epoch", "uniform_acc", "weighted_acc_ema", "mean_length", "mean_loss")


def trace_to_csv(trace: RunTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for e in range(trace.epochs_run):
            row = (
                str(e + 1),
                repr(float(trace.uniform_acc[e])),
                repr(float(trace.weighted_acc_ema[e])),
                repr(float(trace.mean_length[e])),
                repr(float(trace.mean_loss[e])),
            )
            fh.write(",".join(row) + "\n")


def loss_components_to_csv(trace: RunTrace, path) -> None:
    """Companion dump: the decomposition of the recorded loss per epoch."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_task_loss,mean_length_penalty,mean_entropy\n")
        for e in range(trace.epochs_run):
            fh.write(
                f"{e + 1},{float(trace.mean_task_loss[e])!r},"
                f"{float(trace.mean_length_penalty[e])!r},{float(trace.mean_entropy[e])!r}\n"
            )


# ---------------------------------------------------------------------------
# one training batch (shared by train() and the estimator tests)


def _batch_speaker_grad_logits(
    rollout: agents.SpeakerRollout,
    advantage: np.ndarray,
    entropy_coeff: float,
) -> np.ndarray:
    """Per-step output-logit gradients of the speaker surrogate, batch-mean scaled."""
    S, B, V = rollout.probs.shape
    if S == 0:
        return np.zeros((S, B, V))
    active = rollout.active
    adv_w = np.where(active, (advantage / B)[None, :], 0.0)  # (S, B)
    g = -adv_w[:, :, None] * rollout.probs
    steps = np.arange(S)[:, None]
    rows = np.arange(B)[None, :]
    g[steps, rows, rollout.symbols[:, :S].T] += adv_w
    if entropy_coeff != 0.0:
        # entropy bonus enters the loss negatively
        h_all = numcore.entropy_from_probs(rollout.probs)  # (S, B)
        ent_w = entropy_coeff / (B * np.maximum(rollout.n_sampled, 1))
        ew = np.where(active, ent_w[None, :], 0.0)
        g -= ew[:, :, None] * numcore.entropy_grad_logits(rollout.probs, h_all)
    return g


def run_training_batch(
    cfg: TrainConfig,
    speaker: agents.SpeakerParams,
    listener: agents.ListenerParams,
    ranks: np.ndarray,
    rng: np.random.Generator,
    baseline: Baseline,
    acc_estimate: float,
):
    """Rollout, listener forward, losses and joint gradients for one batch.

    Returns (grads, stats) where stats carries the per-batch means needed by
    the trace and the tracker. Does not touch parameters or the baseline.
    """
    B = ranks.shape[0]
    rows = np.arange(B)
    alphabet = cfg.alphabet()

    rollout = agents.speaker_rollout_batch(speaker, alphabet, ranks, "sample", rng)
    lb = agents.listener_forward_batch(listener, rollout.symbols, rollout.lengths, per_position=cfg.impatient)

    targets = ranks - 1
    if cfg.impatient:
        T = lb.logp_steps.shape[0]
        pos_mask = np.arange(T)[:, None] < rollout.lengths[None, :]  # (T, B)
        logp_true = lb.logp_steps[:, rows, targets]  # (T, B)
        task = -(logp_true * pos_mask).sum(axis=0) / rollout.lengths
    else:
        task = -lb.logp_final[rows, targets]

    alpha = alpha_schedule(acc_estimate, cfg.sched_beta1, cfg.sched_beta2) if cfg.lazy else 0.0
    length_penalty = alpha * rollout.lengths.astype(np.float64)
    total = task + length_penalty
    if not np.all(np.isfinite(total)):
        raise DivergenceError("non-finite training loss")

    # listener gradients: d(batch-mean task loss)/d logits
    if cfg.impatient:
        probs_steps = np.exp(lb.logp_steps)
        glog_steps = probs_steps * pos_mask[:, :, None]
        glog_steps[:, rows, targets] -= pos_mask
        glog_steps /= B * rollout.lengths[None, :, None]
        listener_grads = agents.listener_backward(listener, lb, grad_logits_steps=glog_steps)
    else:
        glog_final = np.exp(lb.logp_final)
        glog_final[rows, targets] -= 1.0
        glog_final /= B
        listener_grads = agents.listener_backward(listener, lb, grad_logits_final=glog_final)

    advantage = total - baseline.value
    speaker_grads = agents.speaker_backward(
        speaker, rollout, _batch_speaker_grad_logits(rollout, advantage, cfg.entropy_coeff)
    )

    batch_acc = float(np.mean(np.argmax(lb.logp_final, axis=1) + 1 == ranks))
    stats = {
        "mean_total": float(total.mean()),
        "mean_task": float(task.mean()),
        "mean_length_penalty": float(length_penalty.mean()),
        "mean_entropy": float(rollout.entropy.mean()),
        "batch_acc": batch_acc,
    }
    return {**speaker_grads, **listener_grads}, stats


# ---------------------------------------------------------------------------
# training loop


def train(cfg: TrainConfig, progress=None, early_stop=None) -> RunTrace:
    """Run the full schedule and return the trace.

    Identical (config, seed) pairs reproduce bit-identical traces. A
    non-finite loss aborts with :class:`DivergenceError` carrying the trace
    accumulated so far. ``progress``, if given, is called as
    ``progress(epoch, uniform_acc, mean_length, mean_loss)`` after each
    epoch. ``early_stop(epoch, series)`` (series: dict of per-epoch lists),
    if given, ends the run after any epoch for which it returns True; it must
    be a pure function of its arguments for runs to stay reproducible.
    """
    rng = np.random.default_rng(cfg.seed)
    space = cfg.input_space()
    alphabet = cfg.alphabet()
    speaker = agents.init_speaker(rng, cfg.n_inputs, cfg.voc_size, cfg.speaker_hidden, cfg.emb_dim)
    listener = agents.init_listener(rng, cfg.n_inputs, cfg.voc_size, cfg.listener_hidden, cfg.emb_dim)
    # one flat buffer lets Adam update everything in a few vector ops
    flat, views = agents.flatten_parameters(speaker, listener)
    flat_params = {"all": flat}
    opt = numcore.AdamState(lr=cfg.lr)
    baseline = Baseline()
    tracker = AccuracyTracker(decay=cfg.acc_ema_decay)

    series: dict[str, list[float]] = {k: [] for k in (
        "uniform_acc", "weighted_acc_ema", "mean_length", "mean_loss",
        "mean_task_loss", "mean_length_penalty", "mean_entropy",
    )}

    def build_trace() -> RunTrace:
        return RunTrace(
            config=cfg,
            language=agents.greedy_language(speaker, alphabet, space.probs),
            speaker=speaker,
            listener=listener,
            **{k: np.array(v) for k, v in series.items()},
        )

    for epoch in range(1, cfg.epochs + 1):
        sums = {"mean_total": 0.0, "mean_task": 0.0, "mean_length_penalty": 0.0, "mean_entropy": 0.0}
        for _ in range(cfg.batches_per_epoch):
            ranks = sample_inputs(space, rng, cfg.batch_size)
            try:
                grads, stats = run_training_batch(cfg, speaker, listener, ranks, rng, baseline, tracker.value)
                numcore.adam_step(opt, flat_params, {"all": agents.flatten_grads(grads, views)})
            except DivergenceError as err:
                raise DivergenceError(
                    f"aborting at epoch {epoch}: {err}", trace=build_trace()
                ) from err
            baseline.update(stats["mean_total"])
            tracker.update(stats["batch_acc"])
            for k in sums:
                sums[k] += stats[k]

        nb = cfg.batches_per_epoch
        language = agents.greedy_language(speaker, alphabet, space.probs)
        preds = agents.predict_ranks(listener, language.messages, alphabet.eos)
        series["uniform_acc"].append(float(np.mean(preds == np.arange(1, cfg.n_inputs + 1))))
        series["weighted_acc_ema"].append(tracker.value)
        series["mean_length"].append(float(language.lengths().mean()))
        series["mean_loss"].append(sums["mean_total"] / nb - cfg.entropy_coeff * sums["mean_entropy"] / nb)
        series["mean_task_loss"].append(sums["mean_task"] / nb)
        series["mean_length_penalty"].append(sums["mean_length_penalty"] / nb)
        series["mean_entropy"].append(sums["mean_entropy"] / nb)
        if progress is not None:
            progress(epoch, series["uniform_acc"][-1], series["mean_length"][-1], series["mean_loss"][-1])
        if early_stop is not None and early_stop(epoch, series):
            break

    return build_trace()
