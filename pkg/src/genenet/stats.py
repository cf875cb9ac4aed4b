"""Plot data: match histograms, time-evolution curves, binomial references, KS comparison.

Everything here emits plot-ready numbers; no rendering. CSV exports may
carry a single leading ``# {...}`` metadata line, which the readers skip.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .genome import binomial_pmf, memory_factor

TRAJECTORY_HEADER = ["clock", "mean_match", "min_match", "max_match", "population_size"]


def _meta_line(meta: dict | None) -> str:
    return "" if meta is None else "# " + json.dumps(meta, sort_keys=True) + "\n"


def _read_rows(text: str) -> tuple[dict | None, list[list[str]]]:
    meta = None
    lines = text.splitlines()
    if lines and lines[0].startswith("# "):
        meta = json.loads(lines[0][2:])
        lines = lines[1:]
    return meta, list(csv.reader(lines))


def _write_rows(header, rows, meta=None) -> str:
    buf = io.StringIO()
    buf.write(_meta_line(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass(frozen=True)
class TrajectoryPoint:
    clock: int
    mean_match: float
    min_match: int
    max_match: int
    population_size: int


@dataclass(frozen=True)
class Trajectory:
    points: list

    def __post_init__(self):
        clocks = [p.clock for p in self.points]
        if any(b <= a for a, b in zip(clocks, clocks[1:])):
            raise ValueError("trajectory clocks must be strictly increasing")

    def __len__(self):
        return len(self.points)

    @property
    def clocks(self) -> np.ndarray:
        return np.array([p.clock for p in self.points])

    @property
    def mean_match(self) -> np.ndarray:
        return np.array([p.mean_match for p in self.points])

    def to_csv(self, meta: dict | None = None) -> str:
        rows = [[p.clock, repr(p.mean_match), p.min_match, p.max_match, p.population_size] for p in self.points]
        return _write_rows(TRAJECTORY_HEADER, rows, meta)

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        _, rows = _read_rows(text)
        if rows[0] != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {rows[0]}")
        return cls([TrajectoryPoint(int(r[0]), float(r[1]), int(r[2]), int(r[3]), int(r[4])) for r in rows[1:]])

    def to_json(self, meta: dict | None = None) -> str:
        return json.dumps({"meta": meta, "points": [[p.clock, p.mean_match, p.min_match, p.max_match,
                                                     p.population_size] for p in self.points]})

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        return cls([TrajectoryPoint(int(c), float(m), int(lo), int(hi), int(s))
                    for c, m, lo, hi, s in json.loads(text)["points"]])


@dataclass(frozen=True)
class MatchHistogram:
    bin_edges: np.ndarray  # left edges; last bin closes at n
    counts: np.ndarray
    n_pairs: int
    params_tag: str = ""
    n: int = field(default=0)

    def __post_init__(self):
        if int(self.counts.sum()) != self.n_pairs:
            raise ValueError("histogram counts do not sum to n_pairs")

    @classmethod
    def from_matches(cls, matches, n: int, params_tag: str = "") -> "MatchHistogram":
        matches = np.asarray(matches, dtype=np.int64)
        if matches.size and (matches.min() < 0 or matches.max() > n):
            raise ValueError("match count outside 0..n")
        counts = np.bincount(matches, minlength=n + 1)
        return cls(np.arange(n + 1), counts, int(matches.size), params_tag, n)

    def mean(self) -> float:
        centres = self.bin_edges if self.width == 1 else self.bin_edges + (self.width - 1) / 2
        return float((centres * self.counts).sum() / self.n_pairs)

    @property
    def width(self) -> int:
        return int(self.bin_edges[1] - self.bin_edges[0]) if len(self.bin_edges) > 1 else 1

    def rebin(self, width: int) -> "MatchHistogram":
        if width < 1:
            raise ValueError("bin width must be positive")
        if self.width != 1:
            raise ValueError("rebinning only from unit-width bins")
        nb = -(-(self.n + 1) // width)
        counts = np.zeros(nb, dtype=np.int64)
        np.add.at(counts, self.bin_edges // width, self.counts)
        return MatchHistogram(np.arange(nb) * width, counts, self.n_pairs, self.params_tag, self.n)

    def to_csv(self, meta: dict | None = None) -> str:
        # n and the tag ride in the metadata line: a rebinned table cannot recover n on its own
        meta = {**(meta or {}), "n": self.n, "params_tag": self.params_tag}
        return _write_rows(["match_count", "count"], zip(self.bin_edges.tolist(), self.counts.tolist()), meta)

    @classmethod
    def from_csv(cls, text: str) -> "MatchHistogram":
        meta, rows = _read_rows(text)
        meta = meta or {}
        if rows[0] != ["match_count", "count"]:
            raise ValueError(f"unexpected histogram header {rows[0]}")
        edges = np.array([int(r[0]) for r in rows[1:]])
        counts = np.array([int(r[1]) for r in rows[1:]])
        n = meta.get("n", len(edges) - 1)
        return cls(edges, counts, int(counts.sum()), meta.get("params_tag", ""), n)

    def to_json(self, meta: dict | None = None) -> str:
        return json.dumps({"meta": meta, "params_tag": self.params_tag, "n": self.n,
                           "bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MatchHistogram":
        d = json.loads(text)
        counts = np.array(d["counts"], dtype=np.int64)
        return cls(np.array(d["bin_edges"]), counts, int(counts.sum()), d["params_tag"], d["n"])

    def __eq__(self, other):
        return (isinstance(other, MatchHistogram) and self.n == other.n and self.n_pairs == other.n_pairs
                and self.params_tag == other.params_tag
                and np.array_equal(self.bin_edges, other.bin_edges) and np.array_equal(self.counts, other.counts))


def pairwise_match_distribution(pop, pair_budget: int | None = None, params_tag: str = "") -> MatchHistogram:
    """Histogram of match counts over all pairs of `pop` (sampled for large populations)."""
    from .population import SAMPLED_PAIRS, pairwise_matches

    genomes = pop.genomes if hasattr(pop, "genomes") else np.asarray(pop)
    rng = getattr(pop, "sample_rng", None)
    m = pairwise_matches(genomes, rng, pair_budget or SAMPLED_PAIRS)
    return MatchHistogram.from_matches(m, genomes.shape[1], params_tag)


def binomial_reference(n: int, p: float) -> list[tuple[int, float]]:
    return [(k, binomial_pmf(k, n, p)) for k in range(n + 1)]


def reference_csv(curves: dict, meta: dict | None = None) -> str:
    """One CSV for several reference curves, keyed by their label (e.g. "1/26")."""
    rows = [[label, k, repr(v)] for label, curve in curves.items() for k, v in curve]
    return _write_rows(["p", "k", "pmf"], rows, meta)


def overlay_memory_factor(traj: Trajectory, p_mutate: float, scale: float,
                          normalizer: float = 1.0) -> list[tuple[int, float]]:
    """scale * (1 - p_mutate)**(clock / normalizer) at each trajectory clock.

    Pass ``normalizer=parent_count`` to measure time in births per parent slot.
    """
    return [(int(c), scale * memory_factor(c / normalizer, p_mutate)) for c in traj.clocks]


def per_capita_time(clock, max_size: int):
    """Births per node: equal values are comparable across population sizes."""
    return np.asarray(clock) / max_size


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float


def ks_two_sample(a, b) -> KSResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    res = sps.ks_2samp(a, b, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue))
