"""Analysis toolkit for emergent codes: length-efficiency metrics, the
frequency/length randomization test, the symbol-substitution informativeness
protocol and its derived statistics, training-curve stability, and the
minimal prefix a per-position listener needs before its prediction locks in.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations as iter_permutations

import numpy as np

from . import agents
from .game import Language
from .refcodes import FrequencyLengthMapping, UnigramDistribution, effective_vocab_size

DEFAULT_PERMUTATIONS = 100_000
_PREDICT_CHUNK = 1024


def _as_mapping(lang_or_mapping) -> FrequencyLengthMapping:
    if isinstance(lang_or_mapping, Language):
        return FrequencyLengthMapping.from_language(lang_or_mapping)
    return lang_or_mapping


def l_type(lang_or_mapping) -> float:
    """Mean message length under uniform input weights."""
    return float(_as_mapping(lang_or_mapping).lengths.mean())


def l_token(lang_or_mapping) -> float:
    """Mean message length weighted by input frequency."""
    m = _as_mapping(lang_or_mapping)
    if abs(m.freqs.sum() - 1.0) > 1e-9:
        raise ValueError("frequencies must be normalized")
    return float(m.freqs @ m.lengths)


# ---------------------------------------------------------------------------
# randomization test


def randomization_test(
    lang_or_mapping,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    rng: np.random.Generator | None = None,
    exhaustive: bool = False,
) -> tuple[float, float]:
    """Two-sided permutation test of the frequency/length association.

    The statistic is the frequency-weighted mean length. The left p-value is
    the fraction of permutations of the frequencies whose statistic is <= the
    observed one (ties count on both sides); a small left p-value certifies
    that short messages sit on frequent inputs significantly more than
    chance. In Monte-Carlo mode the identity permutation is added to the
    tally, so p-values are never 0. Returns (p_left, p_right).
    """
    m = _as_mapping(lang_or_mapping)
    f, lens = m.freqs, m.lengths
    n = f.size
    if n < 2:
        raise ValueError("need at least two entries")
    observed = float(f @ lens)
    tol = 1e-9 * max(1.0, abs(observed))

    if exhaustive:
        count_le = count_ge = total = 0
        for perm in iter_permutations(range(n)):
            s = float(lens @ f[list(perm)])
            count_le += s <= observed + tol
            count_ge += s >= observed - tol
            total += 1
        return count_le / total, count_ge / total

    if rng is None:
        rng = np.random.default_rng(0)
    chunk = max(1, min(n_permutations, 20_000_000 // n))
    count_le = count_ge = 0
    remaining = n_permutations
    while remaining > 0:
        size = min(chunk, remaining)
        fm = np.tile(f, (size, 1))
        rng.permuted(fm, axis=1, out=fm)
        stats = fm @ lens
        count_le += int((stats <= observed + tol).sum())
        count_ge += int((stats >= observed - tol).sum())
        remaining -= size
    denom = n_permutations + 1
    return (1 + count_le) / denom, (1 + count_ge) / denom


# ---------------------------------------------------------------------------
# informativeness protocol


@dataclass
class InformativenessMatrix:
    """Per message and regular-symbol position: does substituting the symbol
    flip the listener's prediction? Only correctly reconstructed inputs are
    scored; the terminator position is never tested."""

    ranks: np.ndarray  # included input ranks, 1-indexed
    rows: list[np.ndarray]  # 0/1 row per included rank, length l(m) - 1
    lengths: np.ndarray  # message lengths of the included ranks
    n_excluded: int = 0

    @property
    def n(self) -> int:
        return self.ranks.size


def informativeness(
    lang: Language,
    predict,
    rng: np.random.Generator | None = None,
    repeats: int = 1,
    policy: str = "any",
) -> InformativenessMatrix:
    """Score every regular-symbol position by random substitution.

    ``predict`` maps a list of messages to an array of 1-indexed predicted
    ranks (see :func:`zlalab.agents.make_predictor`). Each tested position is
    replaced by a symbol drawn uniformly from the regular symbols (the draw
    may collide with the original symbol); with ``repeats > 1`` a position
    counts as informative if any repeat flips the prediction, or the majority
    of them under ``policy='majority'``.
    """
    if policy not in ("any", "majority"):
        raise ValueError(f"unknown policy {policy!r}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    regular = np.array(lang.alphabet.regular_symbols)

    base = np.asarray(predict(lang.messages))
    all_ranks = np.arange(1, lang.n_inputs + 1)
    included = all_ranks[base == all_ranks]

    variants: list = []
    owners: list[tuple[int, int]] = []  # (rank, position) per variant
    for rank in included:
        m = lang.messages[rank - 1]
        for pos in range(len(m) - 1):
            subs = regular[rng.integers(0, regular.size, size=repeats)]
            for s in subs:
                variants.append(m[:pos] + (int(s),) + m[pos + 1 :])
                owners.append((rank, pos))

    preds = np.empty(len(variants), dtype=np.int64)
    for start in range(0, len(variants), _PREDICT_CHUNK):
        stop = min(start + _PREDICT_CHUNK, len(variants))
        preds[start:stop] = predict(variants[start:stop])

    flips: dict[tuple[int, int], int] = {}
    for (rank, pos), pred in zip(owners, preds):
        flips[(rank, pos)] = flips.get((rank, pos), 0) + (pred != rank)

    rows = []
    for rank in included:
        m = lang.messages[rank - 1]
        row = np.zeros(len(m) - 1, dtype=np.int64)
        for pos in range(len(m) - 1):
            c = flips.get((rank, pos), 0)
            row[pos] = (c > 0) if policy == "any" else (2 * c > repeats)
        rows.append(row)

    lengths = np.array([len(lang.messages[r - 1]) for r in included], dtype=np.int64)
    return InformativenessMatrix(included, rows, lengths, n_excluded=lang.n_inputs - included.size)


def fully_informative(lang: Language) -> InformativenessMatrix:
    """The convention used for codes without a listener: every regular symbol
    counts as informative."""
    ranks = np.arange(1, lang.n_inputs + 1)
    rows = [np.ones(len(m) - 1, dtype=np.int64) for m in lang.messages]
    return InformativenessMatrix(ranks, rows, lang.lengths().astype(np.int64))


def positional_spectrum(lam: InformativenessMatrix):
    """Fraction of informative symbols at each position (1-indexed).

    Returns (positions, fractions, counts); positions no message reaches are
    simply absent.
    """
    if lam.n == 0:
        raise ValueError("empty informativeness matrix")
    max_pos = int(max((row.size for row in lam.rows), default=0))
    positions, fractions, counts = [], [], []
    for k in range(max_pos):
        vals = [row[k] for row in lam.rows if row.size > k]
        if not vals:
            continue
        positions.append(k + 1)
        fractions.append(float(np.mean(vals)))
        counts.append(len(vals))
    return np.array(positions), np.array(fractions), np.array(counts)


def l_eff(lam: InformativenessMatrix) -> float:
    """Mean count of informative symbols per message."""
    if lam.n == 0:
        raise ValueError("empty informativeness matrix")
    return float(np.mean([row.sum() for row in lam.rows]))


def rho_inf(lam: InformativenessMatrix) -> float:
    """Mean fraction of informative symbols per message; a bare-terminator
    message has no regular symbols and counts as fully informative (0/0 := 1)."""
    if lam.n == 0:
        raise ValueError("empty informativeness matrix")
    fracs = [row.sum() / row.size if row.size else 1.0 for row in lam.rows]
    return float(np.mean(fracs))


def informative_part_lengths(lam: InformativenessMatrix, lang: Language) -> FrequencyLengthMapping:
    """Length of each message once non-informative symbols are removed,
    paired with its (renormalized) input frequency."""
    freqs = lang.probs[lam.ranks - 1]
    lengths = np.array([row.sum() for row in lam.rows], dtype=np.float64)
    return FrequencyLengthMapping(freqs / freqs.sum(), lengths)


# ---------------------------------------------------------------------------
# training-curve stability


def sliding_average(series, window: int) -> np.ndarray:
    """Centered moving average; windows are clipped at the series ends."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    left = (window - 1) // 2
    right = window // 2
    return np.array([x[max(0, i - left) : min(n, i + right + 1)].mean() for i in range(n)])


def delta_stab(accuracy_series, window: int = 11) -> float:
    """Mean squared deviation of a training curve from its centered moving
    average: small values mean smooth convergence."""
    x = np.asarray(accuracy_series, dtype=np.float64)
    if x.size < 3:
        raise ValueError("series too short to smooth")
    return float(((x - sliding_average(x, window)) ** 2).mean())


# ---------------------------------------------------------------------------
# minimal required length (per-position listener)


@dataclass
class MinimalLengthReport:
    """Earliest reading position from which the per-position listener's
    prediction is correct and stays correct, per correctly decoded input."""

    ranks: np.ndarray  # included ranks
    min_lengths: np.ndarray  # symbols read (terminator counts as one position)
    n_violations: int  # messages where a correct prediction later flipped back
    n_excluded: int

    @property
    def mean(self) -> float:
        return float(self.min_lengths.mean())


def minimal_required_length(lang: Language, listener: agents.ListenerParams) -> MinimalLengthReport:
    symbols, lengths = agents._pad_messages(lang.messages, lang.alphabet.eos)
    batch = agents.listener_forward_batch(listener, symbols, lengths, per_position=True)
    preds = np.argmax(batch.logp_steps, axis=2) + 1  # (T, B)

    ranks_out, mins = [], []
    violations = 0
    for b in range(lang.n_inputs):
        rank = b + 1
        l = int(lengths[b])
        correct = preds[:l, b] == rank
        if not correct[-1]:
            continue
        stable = l - 1
        while stable > 0 and correct[stable - 1]:
            stable -= 1
        first = int(np.argmax(correct))
        if first < stable:
            violations += 1
        ranks_out.append(rank)
        mins.append(stable + 1)
    included = np.array(ranks_out, dtype=np.int64)
    return MinimalLengthReport(
        included,
        np.array(mins, dtype=np.int64),
        n_violations=violations,
        n_excluded=lang.n_inputs - included.size,
    )


# ---------------------------------------------------------------------------
# report assembly


@dataclass
class MetricsReport:
    """Everything the analysis computes for one code. Fields that need a
    listener (or a unigram distribution, or a training curve) are None when
    that ingredient is unavailable."""

    l_type: float
    l_token: float
    p_zla_left: float
    p_zla_right: float
    l_eff: float | None = None
    rho_inf: float | None = None
    spectrum: list[tuple[int, float, int]] | None = None
    delta_stab: float | None = None
    v_eff: float | None = None
    n_messages: int | None = None

    @property
    def p_zla(self) -> float:
        return self.p_zla_left

    def to_dict(self) -> dict:
        return {
            "l_type": self.l_type,
            "l_token": self.l_token,
            "p_zla": self.p_zla_left,
            "p_zla_left": self.p_zla_left,
            "p_zla_right": self.p_zla_right,
            "l_eff": self.l_eff,
            "rho_inf": self.rho_inf,
            "spectrum": [list(row) for row in self.spectrum] if self.spectrum is not None else None,
            "delta_stab": self.delta_stab,
            "v_eff": self.v_eff,
            "n_messages": self.n_messages,
        }

    def table_row(self) -> str:
        fmt = lambda v: "/" if v is None else f"{v:.4g}"
        return (
            f"l_type={fmt(self.l_type)} l_token={fmt(self.l_token)} "
            f"p_zla={fmt(self.p_zla_left)} l_eff={fmt(self.l_eff)} "
            f"rho_inf={fmt(self.rho_inf)} v_eff={fmt(self.v_eff)} delta_stab={fmt(self.delta_stab)}"
        )


def build_report(
    lang_or_mapping,
    lam: InformativenessMatrix | None = None,
    unigrams: UnigramDistribution | None = None,
    accuracy_series=None,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    rng: np.random.Generator | None = None,
) -> MetricsReport:
    mapping = _as_mapping(lang_or_mapping)
    p_left, p_right = randomization_test(mapping, n_permutations, rng)
    report = MetricsReport(
        l_type=l_type(mapping),
        l_token=l_token(mapping),
        p_zla_left=p_left,
        p_zla_right=p_right,
        n_messages=mapping.n,
    )
    if lam is not None:
        positions, fractions, counts = positional_spectrum(lam)
        report.l_eff = l_eff(lam)
        report.rho_inf = rho_inf(lam)
        report.spectrum = [(int(p), float(f), int(c)) for p, f, c in zip(positions, fractions, counts)]
    if unigrams is not None:
        report.v_eff = effective_vocab_size(unigrams)
    if accuracy_series is not None and len(accuracy_series) >= 3:
        report.delta_stab = delta_stab(accuracy_series)
    return report
