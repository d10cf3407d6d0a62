"""The reconstruction game's universe: the input space and its sampling
distribution, the message alphabet, and the input-to-message mapping
(a "language") with its on-disk TSV format.

Conventions used throughout the package:

* inputs are identified by frequency rank ``k`` in ``1..n_inputs`` (rank 1
  most frequent);
* a message is a tuple of symbol ids over the alphabet, with the end-of-
  sequence symbol appearing exactly once, at the final position;
* message length ``l(m)`` counts every symbol including the terminator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

Message = tuple[int, ...]

DISTRIBUTIONS = ("powerlaw", "uniform")


def _probability_table(n_inputs: int, distribution: str) -> np.ndarray:
    if distribution == "powerlaw":
        p = 1.0 / np.arange(1, n_inputs + 1, dtype=np.float64)
        return p / p.sum()
    if distribution == "uniform":
        return np.full(n_inputs, 1.0 / n_inputs)
    raise ConfigurationError(f"unknown distribution {distribution!r}; expected one of {DISTRIBUTIONS}")


@dataclass(frozen=True)
class InputSpace:
    """A universe of ``n_inputs`` ranked inputs with a fixed sampling law.

    Under ``powerlaw`` the k-th most frequent input has probability
    ``(1/k) / sum_j (1/j)``; under ``uniform`` all inputs are equally likely.
    """

    n_inputs: int = 1000
    distribution: str = "powerlaw"
    probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ConfigurationError("n_inputs must be >= 1")
        object.__setattr__(self, "probs", _probability_table(self.n_inputs, self.distribution))
        object.__setattr__(self, "_cdf", np.cumsum(self.probs))


def input_probability(space: InputSpace, k: int) -> float:
    """Probability of sampling the rank-k input (1-indexed)."""
    if not 1 <= k <= space.n_inputs:
        raise ValueError(f"rank {k} outside 1..{space.n_inputs}")
    return float(space.probs[k - 1])


def sample_input(space: InputSpace, rng: np.random.Generator) -> int:
    """Draw one input rank by inverse-CDF sampling."""
    return int(sample_inputs(space, rng, 1)[0])


def sample_inputs(space: InputSpace, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` ranks (1-indexed) by inverse-CDF sampling."""
    u = rng.random(size)
    idx = np.searchsorted(space._cdf, u, side="right")
    return np.minimum(idx, space.n_inputs - 1) + 1


@dataclass(frozen=True)
class Alphabet:
    """Symbol inventory. Symbol id 0 is the end-of-sequence marker; ids
    ``1..voc_size-1`` are the ordinary symbols. Messages never exceed
    ``max_len`` symbols (terminator included)."""

    voc_size: int = 40
    max_len: int = 30
    eos: int = 0

    def __post_init__(self):
        if self.voc_size < 2:
            raise ConfigurationError("voc_size must be >= 2 (at least one symbol besides the terminator)")
        if self.max_len < 1:
            raise ConfigurationError("max_len must be >= 1")
        if not 0 <= self.eos < self.voc_size:
            raise ConfigurationError("eos id must be a valid symbol id")

    @property
    def regular_symbols(self) -> list[int]:
        return [s for s in range(self.voc_size) if s != self.eos]


def message_length(m: Message) -> int:
    """l(m): the symbol count including the terminator."""
    return len(m)


def validate_message(alphabet: Alphabet, m: Message) -> None:
    if len(m) == 0 or len(m) > alphabet.max_len:
        raise ValueError(f"message length {len(m)} outside 1..{alphabet.max_len}")
    if m[-1] != alphabet.eos or any(s == alphabet.eos for s in m[:-1]):
        raise ValueError("message must contain exactly one terminator, at the final position")
    if any(not 0 <= s < alphabet.voc_size for s in m):
        raise ValueError("message contains symbol ids outside the alphabet")


@dataclass
class Language:
    """One message per input rank, plus the rank probabilities."""

    alphabet: Alphabet
    messages: list[Message]
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if len(self.messages) != self.probs.size:
            raise ConfigurationError("one message and one probability per input required")
        for m in self.messages:
            validate_message(self.alphabet, m)

    @property
    def n_inputs(self) -> int:
        return len(self.messages)

    def lengths(self) -> np.ndarray:
        return np.array([len(m) for m in self.messages], dtype=np.float64)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Language)
            and self.alphabet == other.alphabet
            and self.messages == other.messages
            and np.array_equal(self.probs, other.probs)
        )


def language_to_tsv(lang: Language, path) -> None:
    """Dump as one line per rank: ``rank<TAB>probability<TAB>sym sym ...``.

    A header comment records the alphabet so the dump round-trips exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# voc_size={lang.alphabet.voc_size} max_len={lang.alphabet.max_len} eos={lang.alphabet.eos}\n")
        for rank, (m, p) in enumerate(zip(lang.messages, lang.probs), start=1):
            fh.write(f"{rank}\t{float(p)!r}\t{' '.join(str(s) for s in m)}\n")


def language_from_tsv(path) -> Language:
    """Parse a dump produced by :func:`language_to_tsv`."""
    messages: list[Message] = []
    probs: list[float] = []
    alphabet = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = dict(kv.split("=") for kv in line[1:].split())
                alphabet = Alphabet(int(fields["voc_size"]), int(fields["max_len"]), int(fields["eos"]))
                continue
            rank_s, prob_s, syms = line.split("\t")
            if int(rank_s) != len(messages) + 1:
                raise ValueError(f"ranks out of order at line {rank_s!r}")
            probs.append(float(prob_s))
            messages.append(tuple(int(s) for s in syms.split()))
    if alphabet is None:
        if not messages:
            raise ValueError(f"empty language dump: {path}")
        raise ValueError("language dump is missing its alphabet header line")
    return Language(alphabet, messages, np.array(probs))
