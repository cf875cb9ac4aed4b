"""Key transfer between relatives: code table + index permutation, recovered statistically.

The sender transmits ``payload[i] = g(x[phi[i]])``. A relative compares the
payload with its own genome read through a candidate permutation; with the
right permutation every row of the conditional table has one dominant
column, which reveals ``g``. A digest of (g, phi) lets the receiver confirm.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .challenge import DEFAULT_HASH, HashFunction
from .genome import GeneSequence

_VERIFY_TAG = b"genenet/verify/v1"
_KEY_TAG = b"genenet/key/v1"


def _as_bijection(mapping, what: str) -> np.ndarray:
    arr = np.asarray(mapping, dtype=np.int64)
    if arr.ndim != 1 or not np.array_equal(np.sort(arr), np.arange(arr.size)):
        raise ValueError(f"{what} must be a bijection on 0..{arr.size - 1}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


class _Bijection:
    __slots__ = ("mapping",)
    _what = "mapping"

    def __init__(self, mapping):
        self.mapping = _as_bijection(mapping, self._what)

    def __len__(self):
        return self.mapping.size

    def __call__(self, x):
        return self.mapping[x]

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.mapping, other.mapping)

    def __hash__(self):
        return hash(self.mapping.tobytes())

    def __repr__(self):
        return f"{type(self).__name__}({self.mapping.tolist()[:12]}{'...' if len(self) > 12 else ''})"

    def inverse(self):
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(self.mapping.size)
        return type(self)(inv)

    @classmethod
    def identity(cls, size: int):
        return cls(np.arange(size))

    @classmethod
    def random(cls, size: int, rng: np.random.Generator):
        return cls(rng.permutation(size))


class CodeTable(_Bijection):
    """Secret bijection on alphabet indices."""

    _what = "code table"


class IndexPermutation(_Bijection):
    """Secret reordering of genome positions: payload slot i carries position mapping[i]."""

    _what = "index permutation"

    def swapped(self, i: int, j: int) -> "IndexPermutation":
        m = self.mapping.copy()
        m[i], m[j] = m[j], m[i]
        return IndexPermutation(m)

    @classmethod
    def block_local(cls, n: int, width: int, rng: np.random.Generator) -> "IndexPermutation":
        """Independent shuffles inside contiguous windows of `width` positions."""
        if width < 1:
            raise ValueError("window width must be positive")
        m = np.arange(n)
        for start in range(0, n, width):
            m[start:start + width] = rng.permutation(m[start:start + width])
        return cls(m)


def canonical_bytes(g: CodeTable, phi: IndexPermutation) -> bytes:
    return (struct.pack(">II", len(g), len(phi)) + g.mapping.astype(">u4").tobytes()
            + phi.mapping.astype(">u4").tobytes())


def verification_digest(g: CodeTable, phi: IndexPermutation, hash: HashFunction = DEFAULT_HASH) -> bytes:
    return hash.digest(_VERIFY_TAG + canonical_bytes(g, phi))


def derive_shared_key(g: CodeTable, phi: IndexPermutation, hash: HashFunction = DEFAULT_HASH) -> bytes:
    # separate domain tag: the verification digest travels in clear
    return hash.digest(_KEY_TAG + canonical_bytes(g, phi))


@dataclass(frozen=True)
class TransferBundle:
    payload: np.ndarray
    verification_digest: bytes

    def to_json(self, alphabet=None) -> str:
        if alphabet is not None and alphabet.is_textual:
            payload = "".join(alphabet.symbols[i] for i in self.payload)
        else:
            payload = self.payload.tolist()
        return json.dumps({"payload": payload, "digest": self.verification_digest.hex()})

    @classmethod
    def from_json(cls, text: str, alphabet=None) -> "TransferBundle":
        d = json.loads(text)
        p = d["payload"]
        if isinstance(p, str):
            if alphabet is None:
                raise ValueError("textual payload needs an alphabet")
            p = [alphabet.index(c) for c in p]
        return cls(np.asarray(p, dtype=np.int64), bytes.fromhex(d["digest"]))


def _elements(x) -> np.ndarray:
    return x.elements if isinstance(x, GeneSequence) else np.asarray(x)


def encode(genome_x, g: CodeTable, phi: IndexPermutation, hash: HashFunction = DEFAULT_HASH) -> TransferBundle:
    x = _elements(genome_x)
    if len(phi) != x.size:
        raise ValueError(f"permutation size {len(phi)} != genome length {x.size}")
    if x.size and x.max() >= len(g):
        raise ValueError("genome symbol outside code table")
    payload = g.mapping[x[phi.mapping]]
    return TransferBundle(payload, verification_digest(g, phi, hash))


def decode(payload, g: CodeTable, phi: IndexPermutation) -> GeneSequence:
    payload = np.asarray(payload)
    if len(phi) != payload.size:
        raise ValueError("payload and permutation sizes differ")
    x = np.empty_like(payload)
    x[phi.mapping] = g.inverse().mapping[payload]
    return GeneSequence(x)


@dataclass(frozen=True)
class ConditionalTable:
    """counts[x, y]: local symbol x (row) seen against received symbol y (column)."""

    counts: np.ndarray

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def empty_rows(self) -> np.ndarray:
        return self.row_totals == 0

    def conditional(self) -> np.ndarray:
        """Row-normalized p(y|x); empty rows are left as zeros."""
        tot = self.row_totals[:, None]
        return np.divide(self.counts, tot, out=np.zeros(self.counts.shape), where=tot > 0)

    def percent(self) -> np.ndarray:
        return np.rint(100 * self.conditional()).astype(np.int64)

    def to_csv(self, alphabet=None) -> str:
        labels = list(alphabet.symbols) if alphabet is not None else list(range(self.size))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + labels)
        for lab, row in zip(labels, self.percent().tolist()):
            w.writerow([lab] + row)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"counts": self.counts.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ConditionalTable":
        return cls(np.asarray(json.loads(text)["counts"], dtype=np.int64))


def conditional_table(payload, genome_y, phi_candidate: IndexPermutation, size: int | None = None) -> ConditionalTable:
    payload = np.asarray(payload, dtype=np.int64)
    y = _elements(genome_y).astype(np.int64)
    if payload.size != y.size or len(phi_candidate) != y.size:
        raise ValueError("payload, genome and permutation lengths differ")
    local = y[phi_candidate.mapping]
    if size is None:
        size = int(max(payload.max(initial=0), local.max(initial=0))) + 1
    counts = np.bincount(local * size + payload, minlength=size * size).reshape(size, size)
    return ConditionalTable(counts)


def table_entropy(table: ConditionalTable) -> float:
    c = table.counts.astype(float)
    if c.sum() == 0:
        raise ValueError("empty table")
    cond = table.conditional()
    nz = c > 0
    return float(-(c[nz] * np.log2(cond[nz])).sum())


def table_mutual_information(table: ConditionalTable) -> float:
    c = table.counts.astype(float)
    total = c.sum()
    if total == 0:
        raise ValueError("empty table")
    pxy = c / total
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    mi = float((pxy[nz] * np.log2(pxy[nz] / (px @ py)[nz])).sum())
    return max(mi, 0.0)


def conditional_entropy(payload, genome_y, phi_candidate, size=None) -> float:
    """Total surprisal -sum_i log2 p(y_i | x_phi(i)) in bits, plug-in estimates."""
    if len(payload) == 0:
        raise ValueError("empty payload")
    return table_entropy(conditional_table(payload, genome_y, phi_candidate, size))


def mutual_information(payload, genome_y, phi_candidate, size=None) -> float:
    """Plug-in mutual information per symbol, in bits."""
    if len(payload) == 0:
        raise ValueError("empty payload")
    return table_mutual_information(conditional_table(payload, genome_y, phi_candidate, size))


def _best_value(w: np.ndarray) -> int:
    if w.size == 0:
        return 0
    r, c = linear_sum_assignment(w, maximize=True)
    return int(w[r, c].sum())


def max_weight_assignment(weights: np.ndarray) -> np.ndarray:
    """Maximum-weight bijection rows -> columns; lexicographically smallest among optima."""
    w = np.asarray(weights, dtype=np.int64)
    size = w.shape[0]
    argmax = w.argmax(axis=1)
    if np.unique(argmax).size == size:
        return argmax
    best = _best_value(w)
    mapping = np.empty(size, dtype=np.int64)
    free = list(range(size))
    fixed = 0
    for r in range(size):
        for c in free:
            rest = [k for k in free if k != c]
            if fixed + w[r, c] + _best_value(w[r + 1:][:, rest]) == best:
                mapping[r] = c
                fixed += int(w[r, c])
                free = rest
                break
    return mapping


@dataclass(frozen=True)
class CodeRecovery:
    code_table: CodeTable
    confidence: np.ndarray  # per row; 0 for empty rows


def recover_code_table(table: ConditionalTable) -> CodeRecovery:
    """Code table read off the conditional table as the count-maximizing bijection."""
    if table.empty_rows.all():
        raise ValueError("all rows of the conditional table are empty")
    mapping = max_weight_assignment(table.counts)
    tot = table.row_totals
    conf = np.divide(table.counts.max(axis=1), tot, out=np.zeros(table.size), where=tot > 0)
    return CodeRecovery(CodeTable(mapping), conf)


@dataclass(frozen=True)
class PermutationRecovery:
    ranking: list  # (candidate index, mutual information), best first
    verified: bool
    phi: IndexPermutation | None = None
    code_table: CodeTable | None = None


def recover_permutation(payload, genome_y, candidates, digest: bytes, hash: HashFunction = DEFAULT_HASH,
                        size: int | None = None, max_verify: int | None = None) -> PermutationRecovery:
    """Rank candidate permutations by mutual information and verify the top ones against `digest`."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate set is empty")
    payload = np.asarray(payload, dtype=np.int64)
    if size is None:
        size = int(max(payload.max(), _elements(genome_y).max())) + 1
    tables = [conditional_table(payload, genome_y, phi, size) for phi in candidates]
    scores = [table_mutual_information(t) for t in tables]
    # stable sort: ties keep candidate order
    order = sorted(range(len(candidates)), key=lambda i: -scores[i])
    ranking = [(i, scores[i]) for i in order]
    for i in order[: max_verify or len(order)]:
        g = recover_code_table(tables[i]).code_table
        if verification_digest(g, candidates[i], hash) == digest:
            return PermutationRecovery(ranking, True, candidates[i], g)
    return PermutationRecovery(ranking, False)


def random_candidates(n: int, k: int, rng: np.random.Generator, truth: IndexPermutation | None = None):
    """`k` random permutations, with `truth` inserted at a random position when given."""
    cands = [IndexPermutation.random(n, rng) for _ in range(k)]
    if truth is not None:
        cands.insert(int(rng.integers(k + 1)), truth)
    return cands


def block_local_candidates(n: int, width: int, k: int, rng: np.random.Generator,
                           truth: IndexPermutation | None = None):
    cands = [IndexPermutation.block_local(n, width, rng) for _ in range(k)]
    if truth is not None:
        cands.insert(int(rng.integers(k + 1)), truth)
    return cands
