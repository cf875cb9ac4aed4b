"""The evolving gene pool.

Nodes live in a slot array of capacity ``max_size + 1``; a birth appends a
slot, a death swaps the last slot into the hole. Parent eligibility is a
role held by exactly ``min(parent_count, size)`` nodes at any time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .genome import GeneSequence, GenomeParams, draw_child
from .stats import Trajectory, TrajectoryPoint

FULL_PAIR_LIMIT = 200
SAMPLED_PAIRS = 10_000


@dataclass(frozen=True)
class PopulationParams:
    genome: GenomeParams = field(default_factory=GenomeParams)
    max_size: int = 100
    parent_count: int = 100
    seed: int = 0
    # genome snapshot period for stale-copy lookups; None -> max_size, 0 -> off
    history_every: int | None = None

    def __post_init__(self):
        if self.max_size < 2:
            raise ValueError("max_size must be >= 2")
        if not 2 <= self.parent_count <= self.max_size:
            raise ValueError("parent_count must lie in 2..max_size")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def snapshot_period(self) -> int:
        return self.max_size if self.history_every is None else self.history_every

    def to_dict(self) -> dict:
        return {
            "n": self.genome.n,
            "alphabet_size": self.genome.size,
            "p_mutate": self.genome.p_mutate,
            "max_size": self.max_size,
            "parent_count": self.parent_count,
            "seed": self.seed,
            "history_every": self.history_every,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationParams":
        known = {"n", "alphabet_size", "p_mutate", "max_size", "parent_count", "seed", "history_every"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown population keys: {sorted(unknown)}")
        genome = GenomeParams.from_mutation(d.get("p_mutate", 0.04), n=d.get("n", 1000),
                                            alphabet_size=d.get("alphabet_size", 26))
        return cls(genome=genome, max_size=d.get("max_size", 100), parent_count=d.get("parent_count", 100),
                   seed=d.get("seed", 0), history_every=d.get("history_every"))


@dataclass(frozen=True)
class Node:
    id: int
    genome: GeneSequence
    birth_time: int
    parent_eligible: bool


@dataclass(frozen=True)
class BirthDeathEvent:
    clock: int
    child: int
    parents: tuple[int, int]
    removed: int | None
    # audit copies, only filled when step(audit=True)
    parent_genomes: tuple | None = None
    child_genome: np.ndarray | None = None

    def to_json(self) -> str:
        return json.dumps({"clock": self.clock, "child": self.child,
                           "parents": list(self.parents), "removed": self.removed})


class Population:
    def __init__(self, params: PopulationParams):
        self.params = params
        seeds = np.random.SeedSequence(params.seed).spawn(2)
        self.rng = np.random.default_rng(seeds[0])
        # pair sampling for snapshots draws from its own stream so that
        # snapshot frequency never changes the evolution
        self.sample_rng = np.random.default_rng(seeds[1])
        gp = params.genome
        cap = params.max_size + 1
        self._genomes = np.zeros((cap, gp.n), dtype=gp.alphabet.dtype)
        self._ids = np.zeros(cap, dtype=np.int64)
        self._birth = np.zeros(cap, dtype=np.int64)
        self._eligible = np.zeros(cap, dtype=bool)
        self.size = 0
        self.clock = 0
        self._next_id = 0
        self.events: list[BirthDeathEvent] = []
        self.archive: dict[int, np.ndarray] = {}
        self.snapshots: dict[int, tuple[int, ...]] = {}

    # -- slot bookkeeping -------------------------------------------------
    def _append(self, genome: np.ndarray, eligible: bool) -> int:
        s = self.size
        self._genomes[s] = genome
        self._ids[s] = self._next_id
        self._birth[s] = self.clock
        self._eligible[s] = eligible
        self._next_id += 1
        self.size += 1
        return int(self._ids[s])

    def _remove_slot(self, s: int) -> int:
        removed = int(self._ids[s])
        last = self.size - 1
        if s != last:
            self._genomes[s] = self._genomes[last]
            self._ids[s] = self._ids[last]
            self._birth[s] = self._birth[last]
            self._eligible[s] = self._eligible[last]
        self.size -= 1
        return removed

    def _record_history(self):
        period = self.params.snapshot_period
        if period and self.clock % period == 0:
            ids = tuple(int(i) for i in self._ids[: self.size])
            for s, nid in enumerate(ids):
                if nid not in self.archive:
                    g = self._genomes[s].copy()
                    g.flags.writeable = False
                    self.archive[nid] = g
            self.snapshots[self.clock] = ids

    # -- views ------------------------------------------------------------
    @property
    def genomes(self) -> np.ndarray:
        """Read-only (size, n) view of the living genomes."""
        v = self._genomes[: self.size]
        v = v.view()
        v.flags.writeable = False
        return v

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self.size].copy()

    @property
    def eligible_mask(self) -> np.ndarray:
        return self._eligible[: self.size].copy()

    def nodes(self) -> list[Node]:
        return [Node(int(self._ids[s]), GeneSequence(self._genomes[s]), int(self._birth[s]),
                     bool(self._eligible[s])) for s in range(self.size)]

    def slot_of(self, node_id: int) -> int:
        hits = np.flatnonzero(self._ids[: self.size] == node_id)
        if hits.size == 0:
            raise KeyError(f"node {node_id} is not alive")
        return int(hits[0])

    def genome_of(self, node_id: int) -> GeneSequence:
        return GeneSequence(self._genomes[self.slot_of(node_id)])

    def historical_genome(self, node_id: int, age_births: int) -> GeneSequence:
        """Genome of a node alive in the latest snapshot taken at or before clock - age_births."""
        if age_births < 0:
            raise ValueError("age must be non-negative")
        if age_births == 0:
            return self.genome_of(node_id)
        cutoff = self.clock - age_births
        times = [t for t in self.snapshots if t <= cutoff]
        if not times:
            raise LookupError(f"no genome snapshot at or before clock {cutoff}")
        t = max(times)
        if node_id not in self.snapshots[t]:
            raise LookupError(f"node {node_id} not present in snapshot at clock {t}")
        return GeneSequence(self.archive[node_id])

    # -- dynamics ---------------------------------------------------------
    def eligible_parents(self) -> set[int]:
        return {int(i) for i in self._ids[: self.size][self._eligible[: self.size]]}

    def step(self, audit: bool = False) -> BirthDeathEvent:
        if self.size < 2:
            raise RuntimeError("population needs at least two nodes")
        elig = np.flatnonzero(self._eligible[: self.size])
        if elig.size < 2:
            raise RuntimeError("fewer than two parent-eligible nodes")
        rng = self.rng
        k = elig.size
        i = int(rng.integers(k))
        j = int(rng.integers(k - 1))
        j += j >= i
        sa, sb = int(elig[i]), int(elig[j])
        pa, pb = int(self._ids[sa]), int(self._ids[sb])
        a, b = self._genomes[sa], self._genomes[sb]
        parent_genomes = (a.copy(), b.copy()) if audit else None
        child = draw_child(a, b, self.params.genome, rng)

        self.clock += 1
        child_id = self._append(child, eligible=False)
        removed = None
        if self.size > self.params.max_size:
            removed = self._remove_slot(int(rng.integers(self.size)))
        self._repair_eligibility()
        self._record_history()
        ev = BirthDeathEvent(self.clock, child_id, (pa, pb), removed, parent_genomes,
                             child.copy() if audit else None)
        self.events.append(ev)
        return ev

    def _repair_eligibility(self):
        target = min(self.params.parent_count, self.size)
        elig = self._eligible[: self.size]
        missing = target - int(np.count_nonzero(elig))
        while missing > 0:
            # promote the most recently born non-eligible node
            cand = np.flatnonzero(~elig)
            s = int(cand[np.argmax(self._ids[cand])])
            elig[s] = True
            missing -= 1

    def snapshot(self) -> TrajectoryPoint:
        m = pairwise_matches(self.genomes, self.sample_rng)
        return TrajectoryPoint(self.clock, float(m.mean()), int(m.min()), int(m.max()), self.size)

    def run(self, births: int, snapshot_every: int = 0) -> Trajectory:
        """Apply `births` steps, snapshotting every `snapshot_every` births (0: first and last only)."""
        if births < 0:
            raise ValueError("births must be >= 0")
        points = [self.snapshot()]
        for b in range(1, births + 1):
            self.step()
            if (snapshot_every and b % snapshot_every == 0) or (not snapshot_every and b == births):
                points.append(self.snapshot())
        return Trajectory(points)


def bootstrap(params: PopulationParams) -> Population:
    """Two founders with independent uniform genomes, both parent-eligible, clock 0."""
    pop = Population(params)
    gp = params.genome
    for _ in range(2):
        pop._append(pop.rng.integers(0, gp.size, size=gp.n, dtype=gp.alphabet.dtype), eligible=True)
    pop._record_history()
    return pop


def step(pop: Population, audit: bool = False) -> BirthDeathEvent:
    return pop.step(audit=audit)


def run(pop: Population, births: int, snapshot_every: int = 0) -> Trajectory:
    return pop.run(births, snapshot_every)


def eligible_parents(pop: Population) -> set[int]:
    return pop.eligible_parents()


def grow(params: PopulationParams, births: int) -> Population:
    pop = bootstrap(params)
    for _ in range(births):
        pop.step()
    return pop


def pairwise_matches(genomes: np.ndarray, rng: np.random.Generator | None = None,
                     pair_budget: int = SAMPLED_PAIRS) -> np.ndarray:
    """Match counts over all distinct pairs, or `pair_budget` sampled pairs above FULL_PAIR_LIMIT rows."""
    N = genomes.shape[0]
    if N < 2:
        raise ValueError("need at least two genomes")
    if N <= FULL_PAIR_LIMIT:
        return np.concatenate([np.count_nonzero(genomes[i + 1:] == genomes[i], axis=1)
                               for i in range(N - 1)])
    rng = rng if rng is not None else np.random.default_rng(0)
    a, b = sample_pairs(N, pair_budget, rng)
    return np.count_nonzero(genomes[a] == genomes[b], axis=1)


def sample_pairs(N: int, k: int, rng: np.random.Generator):
    """`k` distinct unordered pairs (i < j) drawn uniformly without replacement."""
    total = N * (N - 1) // 2
    k = min(k, total)
    codes = rng.choice(total, size=k, replace=False)
    # decode linear index over the upper triangle
    i = (N - 2 - np.floor(np.sqrt(-8 * codes + 4 * N * (N - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = codes + i + 1 - N * (N - 1) // 2 + (N - i) * ((N - i) - 1) // 2
    return i, j.astype(np.int64)
