"""Gene alphabet, genomes, reproduction and the elementary probability helpers."""
from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field

import numpy as np

# origin codes returned by reproduce(..., return_origin=True)
FROM_A, FROM_B, MUTATED = 0, 1, 2


@dataclass(frozen=True)
class Alphabet:
    size: int = 26
    symbols: tuple = ()

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.size}")
        if not self.symbols:
            syms = tuple(string.ascii_uppercase[: self.size]) if self.size <= 26 else tuple(range(self.size))
            object.__setattr__(self, "symbols", syms)
        if len(self.symbols) != self.size:
            raise ValueError("symbol count does not match alphabet size")
        if len(set(self.symbols)) != self.size:
            raise ValueError("alphabet symbols must be distinct")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def dtype(self):
        return np.uint8 if self.size <= 256 else np.uint16 if self.size <= 65536 else np.int64

    def index(self, symbol) -> int:
        return self._index[symbol]

    @property
    def is_textual(self) -> bool:
        return all(isinstance(s, str) and len(s) == 1 for s in self.symbols)


@dataclass(frozen=True)
class GenomeParams:
    n: int = 1000
    alphabet: Alphabet = field(default_factory=Alphabet)
    p_inherit: float = 0.48
    p_mutate: float = 0.04

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"genome length must be positive, got {self.n}")
        if not 0 < self.p_mutate < 1:
            raise ValueError(f"p_mutate must lie in (0, 1), got {self.p_mutate}")
        if self.p_inherit < 0 or abs(2 * self.p_inherit + self.p_mutate - 1) > 1e-12:
            raise ValueError("need 2*p_inherit + p_mutate == 1")

    @classmethod
    def from_mutation(cls, p_mutate: float, n: int = 1000, alphabet_size: int = 26) -> "GenomeParams":
        return cls(n=n, alphabet=Alphabet(alphabet_size), p_inherit=(1 - p_mutate) / 2, p_mutate=p_mutate)

    @property
    def size(self) -> int:
        return self.alphabet.size


class GeneSequence:
    """Immutable length-n array of alphabet indices."""

    __slots__ = ("elements",)

    def __init__(self, elements, alphabet: Alphabet | None = None):
        arr = np.array(elements, copy=True)
        if arr.ndim != 1:
            raise ValueError("gene sequence must be one-dimensional")
        if alphabet is not None:
            if arr.size and (arr.min() < 0 or arr.max() >= alphabet.size):
                raise ValueError("gene element outside alphabet")
            arr = arr.astype(alphabet.dtype)
        arr.flags.writeable = False
        self.elements = arr

    def __len__(self):
        return self.elements.shape[0]

    def __getitem__(self, idx):
        return self.elements[idx]

    def __eq__(self, other):
        return isinstance(other, GeneSequence) and np.array_equal(self.elements, other.elements)

    def __hash__(self):
        return hash(self.elements.tobytes())

    def __repr__(self):
        head = self.elements[:12].tolist()
        return f"GeneSequence(n={len(self)}, head={head})"

    def to_text(self, alphabet: Alphabet) -> str:
        if not alphabet.is_textual:
            raise ValueError("alphabet has no single-character rendering")
        return "".join(alphabet.symbols[i] for i in self.elements)

    @classmethod
    def from_text(cls, text: str, alphabet: Alphabet) -> "GeneSequence":
        return cls([alphabet.index(c) for c in text], alphabet)

    def to_json(self, alphabet: Alphabet) -> str:
        if alphabet.is_textual:
            return json.dumps(self.to_text(alphabet))
        return json.dumps(self.elements.tolist())

    @classmethod
    def from_json(cls, data: str, alphabet: Alphabet) -> "GeneSequence":
        obj = json.loads(data)
        if isinstance(obj, str):
            return cls.from_text(obj, alphabet)
        return cls(obj, alphabet)


def _check_lengths(a: GeneSequence, b: GeneSequence):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")


def random_genome(params: GenomeParams, rng: np.random.Generator) -> GeneSequence:
    elements = rng.integers(0, params.size, size=params.n, dtype=params.alphabet.dtype)
    return GeneSequence(elements)


def draw_child(a: np.ndarray, b: np.ndarray, params: GenomeParams, rng: np.random.Generator,
               return_origin: bool = False):
    """Raw-array reproduction used by the population hot loop.

    Per position: copy from `a` with prob p_inherit, from `b` with prob
    p_inherit, else a uniform draw over the whole alphabet (which may equal
    either parent).
    """
    u = rng.random(a.shape[0])
    from_b = u >= params.p_inherit
    mutated = u >= 2 * params.p_inherit
    child = np.where(from_b, b, a)
    n_mut = int(np.count_nonzero(mutated))
    if n_mut:
        child[mutated] = rng.integers(0, params.size, size=n_mut, dtype=child.dtype)
    if return_origin:
        origin = from_b.astype(np.int8) + mutated.astype(np.int8)
        return child, origin
    return child


def reproduce(a: GeneSequence, b: GeneSequence, params: GenomeParams, rng: np.random.Generator,
              return_origin: bool = False):
    """Conceive a child of `a` and `b`.

    With ``return_origin=True`` also returns an int8 array holding FROM_A,
    FROM_B or MUTATED for every position.
    """
    _check_lengths(a, b)
    if len(a) != params.n:
        raise ValueError(f"parents have length {len(a)}, params expect {params.n}")
    out = draw_child(a.elements, b.elements, params, rng, return_origin)
    if return_origin:
        return GeneSequence(out[0]), out[1]
    return GeneSequence(out)


def match_count(a: GeneSequence, b: GeneSequence) -> int:
    _check_lengths(a, b)
    return int(np.count_nonzero(a.elements == b.elements))


def binomial_pmf(k: int, n: int, p: float) -> float:
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside 0..{n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    if n <= 30:
        return math.comb(n, k) * p**k * (1 - p) ** (n - k)
    log_c = math.log(math.comb(n, k))  # exact integer, correctly rounded log
    return math.exp(log_c + k * math.log(p) + (n - k) * math.log1p(-p))


def memory_factor(t: float, p_mutate: float) -> float:
    """Probability that a gene element escapes mutation for `t` birth-time units."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return (1.0 - p_mutate) ** t
