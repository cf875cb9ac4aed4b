"""In-memory network harness: recognition runs, adversary injection, clone flags, detection metrics.

Transport is a synchronous FIFO queue. Only challenge digests, indices,
salts and work counters travel between endpoints; every delivered message is
appended to ``trace`` in its serialized form.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .challenge import (ALIEN, INCONCLUSIVE, RELATIVE, Challenge, ChallengeResponse, HashFunction,
                        PosteriorModel, issue_challenge, respond)
from .population import Population, PopulationParams, grow

LEGITIMATE = "legitimate"
RANDOM_GENOME, CLONE_OF, STALE_COPY = "random_genome", "clone_of", "stale_copy"


@dataclass(frozen=True)
class AdversaryKind:
    variant: str
    victim: int | None = None
    age_births: int = 0

    def __post_init__(self):
        if self.variant not in (RANDOM_GENOME, CLONE_OF, STALE_COPY):
            raise ValueError(f"unknown adversary variant {self.variant!r}")
        if self.variant != RANDOM_GENOME and self.victim is None:
            raise ValueError(f"{self.variant} needs a victim")

    @classmethod
    def random_genome(cls):
        return cls(RANDOM_GENOME)

    @classmethod
    def clone_of(cls, victim: int):
        return cls(CLONE_OF, victim)

    @classmethod
    def stale_copy(cls, victim: int, age_births: int):
        return cls(STALE_COPY, victim, age_births)


@dataclass(frozen=True)
class Endpoint:
    id: int
    genome: np.ndarray
    role: str = LEGITIMATE
    kind: AdversaryKind | None = None


@dataclass(frozen=True)
class Message:
    seq: int
    src: int
    dst: int
    kind: str
    body: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class ChallengeParams:
    m: int = 3
    rounds: int = 8
    n_decoys: int = 0
    p_rel: float | None = None  # None -> 1/I (uninformed ordering)
    work_threshold: int | None = None  # total work over all rounds; None -> no limit
    budget: int | None = None  # total candidates over all rounds; None -> rounds * I**m
    hash_name: str = "sha256"

    def __post_init__(self):
        if self.m < 1 or self.rounds < 1 or self.n_decoys < 0:
            raise ValueError("invalid challenge parameters")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ProtocolTranscript:
    initiator: int
    responder: int
    challenges: tuple  # wire JSON, one per round
    responses: tuple
    round_verdicts: tuple
    verdict: str
    work: tuple

    @property
    def total_work(self) -> int:
        return sum(self.work)


class SimNetwork:
    def __init__(self, pop: Population, seed: int):
        if pop.size == 0:
            raise ValueError("population is empty")
        self.n = pop.params.genome.n
        self.alphabet_size = pop.params.genome.size
        self.population = pop
        self.seed = seed
        self.rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.endpoints: dict[int, Endpoint] = {}
        for nid, g in zip(pop.ids.tolist(), pop.genomes):
            g = g.copy()
            g.flags.writeable = False
            self.endpoints[nid] = Endpoint(nid, g)
        self._next_id = max(self.endpoints) + 1_000_000
        self.queue: deque[Message] = deque()
        self.trace: list[str] = []
        self._seq = 0

    # -- transport --------------------------------------------------------
    def send(self, src: int, dst: int, kind: str, body: str):
        self.queue.append(Message(self._seq, src, dst, kind, body))
        self._seq += 1

    def deliver(self) -> Message:
        msg = self.queue.popleft()
        self.trace.append(msg.to_json())
        return msg

    # -- membership -------------------------------------------------------
    @property
    def legitimate_ids(self) -> list[int]:
        return sorted(i for i, e in self.endpoints.items() if e.role == LEGITIMATE)

    @property
    def adversary_ids(self) -> list[int]:
        return sorted(i for i, e in self.endpoints.items() if e.role != LEGITIMATE)

    def genome(self, node_id: int) -> np.ndarray:
        return self.endpoints[node_id].genome

    def matrix(self) -> tuple[list[int], np.ndarray]:
        ids = sorted(self.endpoints)
        return ids, np.stack([self.endpoints[i].genome for i in ids])


def spawn_network(pop: Population, seed: int) -> SimNetwork:
    return SimNetwork(pop, seed)


def inject_adversary(net: SimNetwork, kind: AdversaryKind, rng: np.random.Generator | None = None) -> int:
    rng = rng if rng is not None else net.rng
    if kind.variant == RANDOM_GENOME:
        g = rng.integers(0, net.alphabet_size, size=net.n).astype(net.population.params.genome.alphabet.dtype)
    elif kind.variant == CLONE_OF:
        if kind.victim not in net.endpoints:
            raise KeyError(f"victim {kind.victim} not in network")
        g = net.endpoints[kind.victim].genome.copy()
    else:
        if kind.age_births == 0:
            if kind.victim not in net.endpoints:
                raise KeyError(f"victim {kind.victim} not in network")
            g = net.endpoints[kind.victim].genome.copy()
        else:
            g = net.population.historical_genome(kind.victim, kind.age_births).elements.copy()
    g.flags.writeable = False
    nid = net._next_id
    net._next_id += 1
    net.endpoints[nid] = Endpoint(nid, g, role=kind.variant, kind=kind)
    return nid


def combine_round_verdicts(responses, challenges, work_threshold: int | None) -> str:
    """Alien on any wrong digest or unanswered round; otherwise judged on total work."""
    for resp, ch in zip(responses, challenges):
        if resp.chosen_digest_index is None or resp.chosen_digest_index != ch.true_index:
            return ALIEN
    total = sum(r.candidates_tested for r in responses)
    if work_threshold is None or total <= work_threshold:
        return RELATIVE
    return INCONCLUSIVE


def run_pairwise_recognition(net: SimNetwork, initiator: int, responder: int,
                             params: ChallengeParams) -> ProtocolTranscript:
    for nid in (initiator, responder):
        if nid not in net.endpoints:
            raise KeyError(f"unknown endpoint {nid}")
    I = net.alphabet_size
    hash = HashFunction(params.hash_name)
    model = PosteriorModel(params.p_rel if params.p_rel is not None else 1 / I, I)
    budget = params.budget if params.budget is not None else params.rounds * I**params.m
    verifier_genome = net.genome(initiator)
    private, wire_ch, wire_resp, responses, round_verdicts = [], [], [], [], []
    spent = 0
    for _ in range(params.rounds):
        idx = net.rng.choice(net.n, size=params.m, replace=False)
        ch = issue_challenge(verifier_genome, idx, params.n_decoys, hash, net.rng, I)
        private.append(ch)
        net.send(initiator, responder, "challenge", ch.to_json())
        msg = net.deliver()
        received = Challenge.from_json(msg.body)
        resp = respond(net.genome(responder), received, model, max(budget - spent, 1))
        net.send(responder, initiator, "response", resp.to_json(include_timing=False))
        msg = net.deliver()
        resp = ChallengeResponse.from_json(msg.body)
        responses.append(resp)
        wire_ch.append(received.to_json())
        wire_resp.append(msg.body)
        spent += resp.candidates_tested
        ok = resp.chosen_digest_index is not None and resp.chosen_digest_index == ch.true_index
        round_verdicts.append(RELATIVE if ok else ALIEN)
        if not ok:
            break
    verdict = combine_round_verdicts(responses, private, params.work_threshold)
    return ProtocolTranscript(initiator, responder, tuple(wire_ch), tuple(wire_resp), tuple(round_verdicts),
                              verdict, tuple(r.candidates_tested for r in responses))


# -- calibration --------------------------------------------------------------

def legitimate_match_stats(net: SimNetwork) -> tuple[float, int]:
    """(mean, max) pairwise match count among legitimate endpoints."""
    from .population import pairwise_matches

    G = np.stack([net.genome(i) for i in net.legitimate_ids])
    m = pairwise_matches(G, np.random.default_rng(0))
    return float(m.mean()), int(m.max())


def calibrate_clone_threshold(net: SimNetwork) -> int:
    mean, mx = legitimate_match_stats(net)
    rate = mean / net.n
    sigma = math.sqrt(net.n * rate * (1 - rate))
    return min(net.n - 1, int(math.ceil(mx + 3 * sigma)))


def random_legit_pair(net: SimNetwork) -> tuple[int, int]:
    ids = net.legitimate_ids
    i, j = net.rng.choice(len(ids), size=2, replace=False)
    return ids[int(i)], ids[int(j)]


def calibrate_challenge(net: SimNetwork, params: ChallengeParams, trials: int = 100,
                        percentile: float = 99.0, budget_factor: float = 1.5) -> ChallengeParams:
    """Estimate p_rel from the pool and set the work threshold from legitimate trials."""
    mean, _ = legitimate_match_stats(net)
    p_rel = mean / net.n
    probe = replace(params, p_rel=p_rel, work_threshold=None, budget=None)
    work = [run_pairwise_recognition(net, *random_legit_pair(net), probe).total_work for _ in range(trials)]
    thr = int(math.ceil(np.percentile(work, percentile)))
    return replace(params, p_rel=p_rel, work_threshold=thr, budget=int(math.ceil(budget_factor * thr)))


# -- detection ----------------------------------------------------------------

def clone_detection(net: SimNetwork, similarity_threshold: int) -> list[tuple[int, int]]:
    """Endpoint pairs (a < b) whose match count reaches the threshold."""
    ids, G = net.matrix()
    flagged = []
    for k in range(len(ids) - 1):
        m = np.count_nonzero(G[k + 1:] == G[k], axis=1)
        for off in np.flatnonzero(m >= similarity_threshold):
            flagged.append((ids[k], ids[k + 1 + int(off)]))
    return flagged


@dataclass(frozen=True)
class Consensus:
    verdict: str
    votes: dict
    transcripts: tuple


def collaborative_check(net: SimNetwork, suspect: int, committee, params: ChallengeParams,
                        quorum: float = 0.5) -> Consensus:
    committee = list(committee)
    if not committee:
        raise ValueError("committee is empty")
    if suspect in committee:
        raise ValueError("suspect cannot sit on its own committee")
    ts = tuple(run_pairwise_recognition(net, member, suspect, params) for member in committee)
    votes = {v: sum(t.verdict == v for t in ts) for v in (RELATIVE, ALIEN, INCONCLUSIVE)}
    size = len(committee)
    if votes[ALIEN] / size >= quorum:
        verdict = ALIEN
    elif votes[RELATIVE] / size >= quorum:
        verdict = RELATIVE
    else:
        verdict = INCONCLUSIVE
    return Consensus(verdict, votes, ts)


def _work_histogram(work) -> dict:
    """Counts over power-of-two bins: key b holds work in [2**b, 2**(b+1))."""
    hist: dict[str, int] = {}
    for w in work:
        b = str(int(w).bit_length() - 1)
        hist[b] = hist.get(b, 0) + 1
    return dict(sorted(hist.items(), key=lambda kv: int(kv[0])))


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class DetectionReport:
    adversaries: list = field(default_factory=list)
    pairwise: dict = field(default_factory=dict)
    consensus: dict = field(default_factory=dict)
    clone_flags: list = field(default_factory=list)
    tpr: float = 0.0
    fpr: float = 0.0
    work: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DetectionReport":
        return cls(**json.loads(text))

    def kind_rate(self, kind: str) -> float:
        return self.pairwise["by_kind"][kind]["tpr"]


def _tally(transcripts) -> dict:
    out = {"trials": len(transcripts)}
    for v in (RELATIVE, ALIEN, INCONCLUSIVE):
        out[v] = sum(t.verdict == v for t in transcripts)
    return out


def metrics(legit_transcripts, adversary_records, flags, legit_consensus=()) -> DetectionReport:
    """Aggregate transcripts into rates.

    `adversary_records` holds dicts with keys id, kind, victim, consensus
    (a Consensus) and clone_flagged.
    """
    legit = _tally(legit_transcripts)
    legit["fpr"] = _rate(legit[ALIEN], legit["trials"])
    by_kind: dict[str, list] = {}
    cons_kind: dict[str, list] = {}
    advs = []
    detected = 0
    for rec in adversary_records:
        ts = rec["consensus"].transcripts
        by_kind.setdefault(rec["kind"], []).extend(ts)
        cons_kind.setdefault(rec["kind"], []).append(rec["consensus"].verdict)
        caught = rec["consensus"].verdict == ALIEN or rec["clone_flagged"]
        detected += caught
        advs.append({"id": rec["id"], "kind": rec["kind"], "victim": rec.get("victim"),
                     "consensus": rec["consensus"].verdict, "votes": rec["consensus"].votes,
                     "pairwise": [t.verdict for t in ts], "clone_flagged": rec["clone_flagged"],
                     "detected": bool(caught)})
    pair_kind = {}
    for kind, ts in sorted(by_kind.items()):
        tally = _tally(ts)
        tally["tpr"] = _rate(tally[ALIEN], tally["trials"])
        pair_kind[kind] = tally
    consensus = {}
    for kind, vs in sorted(cons_kind.items()):
        c = {"suspects": len(vs), **{v: vs.count(v) for v in (RELATIVE, ALIEN, INCONCLUSIVE)}}
        c["tpr"] = _rate(c[ALIEN], len(vs))
        consensus[kind] = c
    if legit_consensus:
        vs = [c.verdict for c in legit_consensus]
        consensus[LEGITIMATE] = {"suspects": len(vs), **{v: vs.count(v) for v in (RELATIVE, ALIEN, INCONCLUSIVE)},
                                 "fpr": _rate(vs.count(ALIEN), len(vs))}
    alien_work = [t.total_work for ts in by_kind.values() for t in ts if t.verdict != RELATIVE]
    relative_work = [t.total_work for t in legit_transcripts]
    return DetectionReport(
        adversaries=advs,
        pairwise={"legitimate": legit, "by_kind": pair_kind},
        consensus=consensus,
        clone_flags=[list(p) for p in flags],
        tpr=_rate(detected, len(advs)),
        fpr=legit["fpr"],
        work={"relative": {"median": float(np.median(relative_work)) if relative_work else 0.0,
                           "histogram_log2": _work_histogram(relative_work)},
              "alien": {"median": float(np.median(alien_work)) if alien_work else 0.0,
                        "histogram_log2": _work_histogram(alien_work)}},
    )


# -- scenarios ----------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    population: dict = field(default_factory=lambda: {"max_size": 100, "parent_count": 10, "seed": 1})
    births: int | None = None  # None -> 100 * max_size
    network_seed: int = 2
    adversaries: list = field(default_factory=lambda: [{"kind": RANDOM_GENOME, "count": 20},
                                                       {"kind": CLONE_OF, "count": 20}])
    trials: dict = field(default_factory=lambda: {"calibration": 100, "legitimate": 100,
                                                  "committee_size": 5, "legitimate_suspects": 10})
    protocol: dict = field(default_factory=lambda: {"m": 3, "rounds": 8, "n_decoys": 0, "quorum": 0.5,
                                                    "percentile": 99.0, "budget_factor": 1.5})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {"population", "births", "network_seed", "adversaries", "trials", "protocol"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        base = cls()
        sc = cls(population={**base.population, **d.get("population", {})},
                 births=d.get("births"),
                 network_seed=d.get("network_seed", base.network_seed),
                 adversaries=d.get("adversaries", base.adversaries),
                 trials={**base.trials, **d.get("trials", {})},
                 protocol={**base.protocol, **d.get("protocol", {})})
        for adv in sc.adversaries:
            if adv.get("kind") not in (RANDOM_GENOME, CLONE_OF, STALE_COPY):
                raise ValueError(f"bad adversary entry {adv}")
        return sc

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def run_scenario(sc: Scenario) -> tuple[DetectionReport, SimNetwork]:
    params = PopulationParams.from_dict(sc.population)
    births = sc.births if sc.births is not None else 100 * params.max_size
    pop = grow(params, births)
    net = spawn_network(pop, sc.network_seed)
    proto = sc.protocol
    base = ChallengeParams(m=proto["m"], rounds=proto["rounds"], n_decoys=proto["n_decoys"],
                           hash_name=proto.get("hash_name", "sha256"))
    cp = calibrate_challenge(net, base, sc.trials["calibration"], proto["percentile"], proto["budget_factor"])

    injected = []
    for adv in sc.adversaries:
        for _ in range(adv["count"]):
            legit = net.legitimate_ids
            if adv["kind"] == RANDOM_GENOME:
                kind = AdversaryKind.random_genome()
            elif adv["kind"] == CLONE_OF:
                kind = AdversaryKind.clone_of(legit[int(net.rng.integers(len(legit)))])
            else:
                age = adv.get("age_births", params.snapshot_period)
                period = params.snapshot_period
                t = ((pop.clock - age) // period) * period
                alive = pop.snapshots[t]
                kind = AdversaryKind.stale_copy(alive[int(net.rng.integers(len(alive)))], age)
            injected.append((inject_adversary(net, kind), kind))

    clone_thr = calibrate_clone_threshold(net)
    flags = clone_detection(net, clone_thr)
    flagged_ids = {a for p in flags for a in p}

    legit_ts = [run_pairwise_recognition(net, *random_legit_pair(net), cp)
                for _ in range(sc.trials["legitimate"])]
    k = sc.trials["committee_size"]
    records = []
    for nid, kind in injected:
        legit = net.legitimate_ids
        committee = [legit[int(i)] for i in net.rng.choice(len(legit), size=k, replace=False)]
        cons = collaborative_check(net, nid, committee, cp, proto["quorum"])
        records.append({"id": nid, "kind": kind.variant, "victim": kind.victim, "consensus": cons,
                        "clone_flagged": nid in flagged_ids})
    legit_cons = []
    for _ in range(sc.trials.get("legitimate_suspects", 0)):
        legit = net.legitimate_ids
        pick = [legit[int(i)] for i in net.rng.choice(len(legit), size=k + 1, replace=False)]
        legit_cons.append(collaborative_check(net, pick[0], pick[1:], cp, proto["quorum"]))

    report = metrics(legit_ts, records, flags, legit_cons)
    report.calibration = {"p_rel": cp.p_rel, "work_threshold": cp.work_threshold, "budget": cp.budget,
                          "clone_threshold": clone_thr, "births": births}
    report.meta = {"scenario": sc.to_dict(), "version": __version__}
    return report, net
