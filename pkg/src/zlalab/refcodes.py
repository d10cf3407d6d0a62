"""Reference codes and analytic baselines to compare emergent languages
against: the length-optimal deterministic code, the random-typing baseline,
the effective-vocabulary-size solver, and a loader for natural-language
word-frequency lists.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import islice, product

import numpy as np

from .errors import ConfigurationError
from .game import Alphabet, InputSpace, Language, Message

DEFAULT_MONKEY_SAMPLES = 100_000


@dataclass
class FrequencyLengthMapping:
    """Per rank: a normalized frequency weight and a message/word length.

    Length metrics and the randomization test run on this shape, so emergent
    languages, reference codes and natural-language word lists all flow
    through the same code path.
    """

    freqs: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=np.float64)
        self.lengths = np.asarray(self.lengths, dtype=np.float64)
        if self.freqs.shape != self.lengths.shape or self.freqs.ndim != 1 or self.freqs.size == 0:
            raise ConfigurationError("freqs and lengths must be equal-size nonempty vectors")
        if abs(self.freqs.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"frequencies must sum to 1 (got {self.freqs.sum()!r})")
        if (self.lengths < 0).any():
            raise ConfigurationError("lengths must be nonnegative")

    @property
    def n(self) -> int:
        return self.freqs.size

    @classmethod
    def from_language(cls, lang: Language) -> "FrequencyLengthMapping":
        return cls(lang.probs, lang.lengths())


def enumerate_codewords(n_regular: int, eos: int = 0):
    """Yield terminator-ended messages in length-then-lexicographic order,
    starting from the bare-terminator message."""
    regular = [s for s in range(n_regular + 1) if s != eos][:n_regular]
    k = 0
    while True:
        for body in product(regular, repeat=k):
            yield tuple(body) + (eos,)
        k += 1


def optimal_coding(
    voc_size: int, n_inputs: int, distribution: str = "powerlaw", max_len: int | None = None
) -> Language:
    """Assign the shortest messages to the most frequent inputs.

    Messages over the ``voc_size - 1`` regular symbols are enumerated from
    shortest to longest (bare terminator first) and handed out in rank order,
    which minimizes the frequency-weighted mean length.
    """
    if voc_size < 2:
        raise ConfigurationError("voc_size must be >= 2")
    messages = list(islice(enumerate_codewords(voc_size - 1), n_inputs))
    longest = max(len(m) for m in messages)
    if max_len is None:
        max_len = longest
    elif longest > max_len:
        raise ConfigurationError(
            f"{n_inputs} inputs need messages up to length {longest}, over the cap {max_len}"
        )
    space = InputSpace(n_inputs, distribution)
    return Language(Alphabet(voc_size, max_len), messages, space.probs)


def _monkey_draws(
    voc_size: int, max_len: int, n_samples: int, rng: np.random.Generator, eos_in_pool: bool
):
    """Uniform symbol table (n_samples, max_len - 1) plus per-row lengths."""
    pool = voc_size if eos_in_pool else voc_size - 1
    p_eos = 1.0 / pool
    free = max_len - 1
    if free == 0:
        return np.zeros((n_samples, 0), dtype=np.int64), np.ones(n_samples, dtype=np.int64)
    u = rng.random((n_samples, free))
    is_eos = u < p_eos
    symbols = 1 + np.floor((u - p_eos) / (1.0 - p_eos) * (voc_size - 1)).astype(np.int64)
    symbols = np.clip(symbols, 1, voc_size - 1)
    hit = is_eos.any(axis=1)
    first = is_eos.argmax(axis=1)
    lengths = np.where(hit, first + 1, max_len)
    return symbols, lengths


def monkey_lengths(
    voc_size: int,
    max_len: int,
    n_samples: int,
    rng: np.random.Generator | None = None,
    eos_in_pool: bool = True,
) -> np.ndarray:
    """Message lengths only (terminator included) of the random-typing baseline."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    _, lengths = _monkey_draws(voc_size, max_len, n_samples, rng or np.random.default_rng(0), eos_in_pool)
    return lengths


def monkey_typing(
    voc_size: int,
    max_len: int,
    n_samples: int = DEFAULT_MONKEY_SAMPLES,
    rng: np.random.Generator | None = None,
    eos_in_pool: bool = True,
) -> tuple[list[Message], float]:
    """Random-typing baseline: draw symbols uniformly until the terminator.

    By default the terminator competes with every symbol (probability
    ``1/voc_size`` per draw) and is forced at position ``max_len`` if it has
    not appeared, mirroring the constraints the agents' messages live under.
    ``eos_in_pool=False`` switches to the variant where the terminator's
    chance per draw is ``1/(voc_size - 1)``. Returns (messages, mean length).
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    alphabet = Alphabet(voc_size, max_len)
    symbols, lengths = _monkey_draws(voc_size, max_len, n_samples, rng, eos_in_pool)
    messages = [
        tuple(int(s) for s in symbols[b, : lengths[b] - 1]) + (alphabet.eos,)
        for b in range(n_samples)
    ]
    return messages, float(lengths.mean())


def monkey_mean_length(voc_size: int, max_len: int) -> float:
    """Closed-form expected length of the default random-typing convention:
    sum_{k=0}^{max_len-1} ((voc_size-1)/voc_size)**k."""
    q = (voc_size - 1) / voc_size
    return float(sum(q**k for k in range(max_len)))


def monkey_language(
    voc_size: int,
    max_len: int,
    n_inputs: int,
    distribution: str = "powerlaw",
    rng: np.random.Generator | None = None,
    eos_in_pool: bool = True,
) -> Language:
    """One random-typing message per input rank, as a dumpable language."""
    messages, _ = monkey_typing(voc_size, max_len, n_inputs, rng, eos_in_pool)
    return Language(Alphabet(voc_size, max_len), messages, InputSpace(n_inputs, distribution).probs)


@dataclass
class UnigramDistribution:
    """Probability per regular (non-terminator) symbol."""

    probs: np.ndarray
    symbols: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.size == 0 or (self.probs < 0).any() or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("unigram probabilities must be nonnegative and sum to 1")
        if self.symbols is None:
            self.symbols = np.arange(1, self.probs.size + 1)

    def entropy(self) -> float:
        p = self.probs[self.probs > 0.0]
        if p.size == 0:
            raise ValueError("unigram distribution has empty support")
        return float(-(p * np.log(p)).sum())


def effective_vocab_size(u: UnigramDistribution) -> float:
    """The alphabet size whose uniform distribution has the same entropy:
    exp(H(u)) in nats."""
    return float(np.exp(u.entropy()))


def veff_optimal_coding(
    u: UnigramDistribution, n_inputs: int, distribution: str = "powerlaw"
) -> Language:
    """Length-optimal code rebuilt with ceil(V_eff) usable symbols."""
    usable = int(np.ceil(effective_vocab_size(u)))
    return optimal_coding(usable + 1, n_inputs, distribution)


def unigram_distribution(lang: Language, weighted: bool = False) -> UnigramDistribution:
    """Regular-symbol distribution across a language's messages.

    ``weighted`` multiplies each message's counts by its input probability;
    the default counts each message once.
    """
    counts = np.zeros(lang.alphabet.voc_size)
    for m, p in zip(lang.messages, lang.probs):
        w = p if weighted else 1.0
        for s in m[:-1]:
            counts[s] += w
    counts[lang.alphabet.eos] = 0.0
    if counts.sum() == 0.0:
        raise ValueError("language has no regular symbols (terminator-only messages)")
    keep = np.arange(lang.alphabet.voc_size) != lang.alphabet.eos
    return UnigramDistribution(counts[keep] / counts.sum(), symbols=np.arange(lang.alphabet.voc_size)[keep])


def load_frequency_list(path, top_n: int = 1000) -> FrequencyLengthMapping:
    """Read a word-frequency list: one record per line, ``rank frequency word``
    separated by whitespace or tabs. Word length is its character count.
    Malformed lines are skipped with a warning.
    """
    freqs: list[float] = []
    lengths: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                warnings.warn(f"{path}:{lineno}: expected 'rank frequency word', skipping {line!r}")
                continue
            try:
                f = float(parts[1])
            except ValueError:
                warnings.warn(f"{path}:{lineno}: unparseable frequency, skipping {line!r}")
                continue
            word = parts[2]
            if f <= 0 or not word:
                warnings.warn(f"{path}:{lineno}: empty word or nonpositive frequency, skipping")
                continue
            freqs.append(f)
            lengths.append(len(word))
            if len(freqs) == top_n:
                break
    if not freqs:
        raise ValueError(f"no usable records in {path}")
    if len(freqs) < top_n:
        warnings.warn(f"{path}: only {len(freqs)} records (wanted {top_n}); using what exists")
    f = np.array(freqs)
    return FrequencyLengthMapping(f / f.sum(), np.array(lengths, dtype=np.float64))
