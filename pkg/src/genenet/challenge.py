"""Recognition by guessing: hashed gene-element challenges answered in posterior order.

A verifier hashes the values of some of its gene elements (plus decoys) and
the prover enumerates candidate tuples starting from its own elements. A
relative shares many elements with the verifier and therefore finds the
true digest after few guesses; an unrelated node needs about half the tuple
space or falls for a decoy first.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product

import numpy as np

RELATIVE, ALIEN, INCONCLUSIVE = "relative", "alien", "inconclusive"


@dataclass(frozen=True)
class HashFunction:
    name: str = "sha256"

    def __post_init__(self):
        if self.name not in hashlib.algorithms_available:
            raise ValueError(f"unknown hash {self.name!r}")
        if self.name.startswith("shake"):
            raise ValueError("variable-length digests are not supported")

    @property
    def digest_length(self) -> int:
        return hashlib.new(self.name).digest_size

    def new(self, data: bytes = b""):
        return hashlib.new(self.name, data)

    def digest(self, data: bytes) -> bytes:
        return hashlib.new(self.name, data).digest()


DEFAULT_HASH = HashFunction()


def encode_elements(elements) -> bytes:
    """Canonical byte encoding of a symbol tuple: big-endian uint16 per element."""
    arr = np.asarray(elements, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
        raise ValueError("symbols must fit in 16 bits")
    return arr.astype(">u2").tobytes()


def tuple_digest(salt: bytes, elements, hash: HashFunction = DEFAULT_HASH) -> bytes:
    return hash.digest(salt + encode_elements(elements))


@dataclass(frozen=True)
class Challenge:
    indices: tuple
    digests: tuple
    salt: bytes
    hash_name: str = "sha256"
    # known to the verifier only; never serialized
    true_index: int | None = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.indices)

    def public(self) -> "Challenge":
        return replace(self, true_index=None)

    def to_json(self) -> str:
        return json.dumps({"indices": list(self.indices), "digests": [d.hex() for d in self.digests],
                           "salt": self.salt.hex(), "hash_name": self.hash_name}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Challenge":
        d = json.loads(text)
        return cls(tuple(d["indices"]), tuple(bytes.fromhex(h) for h in d["digests"]),
                   bytes.fromhex(d["salt"]), d["hash_name"])


@dataclass(frozen=True)
class ChallengeResponse:
    chosen_digest_index: int | None
    candidates_tested: int
    elapsed_ms: float = 0.0

    def to_json(self, include_timing: bool = True) -> str:
        d = {"digest_index": self.chosen_digest_index, "candidates_tested": self.candidates_tested}
        if include_timing:
            d["elapsed_ms"] = self.elapsed_ms
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChallengeResponse":
        d = json.loads(text)
        return cls(d["digest_index"], d["candidates_tested"], d.get("elapsed_ms", 0.0))


def _exact(p) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(p).limit_denominator(10**12)


@dataclass(frozen=True)
class PosteriorModel:
    """Per-position posterior: own value with prob p_rel, each other value with q."""

    p_rel: float | Fraction
    alphabet_size: int = 26

    def __post_init__(self):
        if self.alphabet_size < 2:
            raise ValueError("alphabet size must be >= 2")
        if not 0 <= self.p_rel <= 1:
            raise ValueError("p_rel must be a probability")

    @property
    def p(self) -> Fraction:
        return _exact(self.p_rel)

    @property
    def q(self) -> Fraction:
        return (1 - self.p) / (self.alphabet_size - 1)

    def tuple_probability(self, own, candidate) -> Fraction:
        matches = sum(int(a) == int(b) for a, b in zip(own, candidate))
        return self.p**matches * self.q ** (len(own) - matches)


def issue_challenge(verifier_genome, index_set, n_decoys: int, hash: HashFunction = DEFAULT_HASH,
                    rng: np.random.Generator | None = None, alphabet_size: int = 26,
                    salt_bytes: int = 16) -> Challenge:
    rng = rng if rng is not None else np.random.default_rng()
    index_set = tuple(int(i) for i in index_set)
    n = len(verifier_genome)
    if not index_set:
        raise ValueError("index set must be non-empty")
    if len(set(index_set)) != len(index_set):
        raise ValueError("duplicate indices in challenge")
    if any(not 0 <= i < n for i in index_set):
        raise ValueError("challenge index outside genome")
    if n_decoys < 0:
        raise ValueError("n_decoys must be >= 0")
    m = len(index_set)
    if n_decoys >= alphabet_size**m:
        raise ValueError("more decoys than alternative tuples")
    elements = np.asarray(verifier_genome[list(index_set)], dtype=np.int64)
    salt = rng.bytes(salt_bytes)
    true_tuple = tuple(elements.tolist())
    seen = {true_tuple}
    tuples = [true_tuple]
    while len(tuples) < n_decoys + 1:
        t = tuple(rng.integers(0, alphabet_size, size=m).tolist())
        if t not in seen:
            seen.add(t)
            tuples.append(t)
    order = rng.permutation(len(tuples))
    digests = tuple(tuple_digest(salt, tuples[k], hash) for k in order)
    if len(set(digests)) != len(digests):
        raise RuntimeError("digest collision among challenge tuples")
    true_pos = int(np.flatnonzero(order == 0)[0])
    return Challenge(index_set, digests, salt, hash.name, true_pos)


def _tier(own: tuple, size: int, mismatches: int):
    """Tuples differing from `own` in exactly `mismatches` positions, lexicographic."""
    m = len(own)
    out = list(own)

    def rec(pos, left):
        if pos == m:
            yield tuple(out)
            return
        room = m - pos - 1
        for s in range(size):
            if s == own[pos]:
                if left <= room:
                    out[pos] = s
                    yield from rec(pos + 1, left)
            elif left:
                out[pos] = s
                yield from rec(pos + 1, left - 1)

    if mismatches == 0:
        yield tuple(own)
    elif mismatches == m:
        yield from product(*[[s for s in range(size) if s != o] for o in own])
    else:
        yield from rec(0, mismatches)


def tier_order(model: PosteriorModel, m: int) -> list[int]:
    """Mismatch counts sorted by non-increasing per-tuple posterior."""
    p, q = model.p, model.q
    return sorted(range(m + 1), key=lambda k: (-(p ** (m - k) * q**k), k))


def posterior_orders(own_elements, model: PosteriorModel):
    """Every tuple in the m-fold tuple space once, most probable first."""
    own = tuple(int(x) for x in own_elements)
    for k in tier_order(model, len(own)):
        yield from _tier(own, model.alphabet_size, k)


def respond(prover_genome, challenge: Challenge, model: PosteriorModel, budget: int) -> ChallengeResponse:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.perf_counter()
    own = np.asarray(prover_genome[list(challenge.indices)], dtype=np.int64).tolist()
    targets = {d: i for i, d in enumerate(challenge.digests)}
    base = hashlib.new(challenge.hash_name, challenge.salt)
    sym = [s.to_bytes(2, "big") for s in range(model.alphabet_size)]
    tested = 0
    for cand in posterior_orders(own, model):
        tested += 1
        h = base.copy()
        h.update(b"".join([sym[s] for s in cand]))
        hit = targets.get(h.digest())
        if hit is not None:
            return ChallengeResponse(hit, tested, (time.perf_counter() - t0) * 1e3)
        if tested >= budget:
            break
    return ChallengeResponse(None, tested, (time.perf_counter() - t0) * 1e3)


def verdict(response: ChallengeResponse, challenge: Challenge, work_threshold: int) -> str:
    if challenge.true_index is None:
        raise ValueError("verdict needs the verifier's copy of the challenge")
    if response.chosen_digest_index is None or response.chosen_digest_index != challenge.true_index:
        return ALIEN
    return RELATIVE if response.candidates_tested <= work_threshold else INCONCLUSIVE


# -- combinatorics of the search space --------------------------------------

def search_space_size(n: int, k: int, I: int) -> int:
    """Number of length-n tuples agreeing with a reference in exactly k positions."""
    if I < 2:
        raise ValueError("alphabet size must be >= 2")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside 0..{n}")
    return math.comb(n, k) * (I - 1) ** (n - k)


def agreement_region(m: int, model: PosteriorModel) -> tuple[int, Fraction]:
    """Count and posterior mass of tuples matching own elements in at least one position."""
    I = model.alphabet_size
    return I**m - (I - 1) ** m, 1 - (1 - model.p) ** m


def prefix_count(n: int, model: PosteriorModel, target_mass) -> int:
    """Smallest posterior-ordered prefix whose mass reaches `target_mass`, by tier arithmetic."""
    target = _exact(target_mass)
    p, q = model.p, model.q
    cum, count = Fraction(0), 0
    for k in tier_order(model, n):
        matches = n - k
        size = search_space_size(n, matches, model.alphabet_size)
        per = p**matches * q**k
        if per == 0:
            continue
        if cum + size * per >= target:
            return count + math.ceil((target - cum) / per)
        cum += size * per
        count += size
    return count


@dataclass(frozen=True)
class WorkRatio:
    uniform_count: int
    relative_count: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.uniform_count, self.relative_count)

    def __float__(self):
        return float(self.ratio)


def work_ratio(n: int, model: PosteriorModel, target_mass) -> WorkRatio:
    target = _exact(target_mass)
    if not 0 < target < 1:
        raise ValueError("target mass must lie in (0, 1)")
    uniform = math.ceil(target * model.alphabet_size**n)
    return WorkRatio(uniform, prefix_count(n, model, target))
