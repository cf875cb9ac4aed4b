"""Command-line experiments: simulate, keyexchange, challenge, attack, export.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
Outputs are assembled in memory and written only after a run succeeds.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .challenge import (PosteriorModel, agreement_region, issue_challenge, prefix_count, respond,
                        search_space_size, work_ratio)
from .genome import binomial_pmf
from .keyexchange import (CodeTable, IndexPermutation, block_local_candidates, conditional_entropy,
                          conditional_table, encode, mutual_information, random_candidates,
                          recover_code_table, recover_permutation)
from .netsim import Scenario, run_scenario
from .population import PopulationParams, bootstrap, pairwise_matches
from .stats import binomial_reference, overlay_memory_factor, pairwise_match_distribution, reference_csv

OUT_ENV = "GENENET_OUT"
USAGE_ERROR, RUNTIME_ERROR = 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    population: dict = field(default_factory=dict)
    births: int | None = None
    snapshot_every: int = 0
    replicas: int = 1
    challenge: dict = field(default_factory=dict)
    keyexchange: dict = field(default_factory=dict)
    scenario: dict | str | None = None
    seed: int = 0
    out: str = "."
    format: str = "csv"
    jobs: int = 1

    def validate(self):
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, not {self.format!r}")
        if self.jobs < 1 or self.replicas < 1:
            raise UsageError("jobs and replicas must be >= 1")
        if self.births is not None and self.births < 0:
            raise UsageError("births must be >= 0")
        if self.snapshot_every < 0:
            raise UsageError("snapshot-every must be >= 0")
        try:
            self.population_params()
        except (ValueError, TypeError) as e:
            raise UsageError(f"bad population config: {e}") from e

    def population_params(self, seed: int | None = None) -> PopulationParams:
        d = {**self.population, "seed": self.seed if seed is None else seed}
        if "parent_count" not in d:
            # every node may breed unless told otherwise
            d["parent_count"] = min(d.get("max_size", 100), 100)
        return PopulationParams.from_dict(d)

    def burn_in(self) -> int:
        return self.births if self.births is not None else 100 * self.population_params().max_size

    def meta(self) -> dict:
        return {"seed": self.seed, "config": {k: v for k, v in asdict(self).items() if k not in ("out", "jobs")},
                "version": f"genenet {__version__}"}


_CONFIG_KEYS = set(RunConfig.__dataclass_fields__)


def _load_config(args) -> RunConfig:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    rc = RunConfig(**cfg)
    rc.population = dict(rc.population)
    # command-line flags override the config file
    pop_flags = {"n": "n", "alphabet": "alphabet_size", "p_mutate": "p_mutate",
                 "max_size": "max_size", "parents": "parent_count"}
    for flag, key in pop_flags.items():
        v = getattr(args, flag, None)
        if v is not None:
            rc.population[key] = v
    for flag in ("births", "snapshot_every", "replicas", "seed", "format", "jobs"):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(rc, flag, v)
    rc.out = args.out or os.environ.get(OUT_ENV) or rc.out
    if getattr(args, "scenario", None):
        rc.scenario = args.scenario
    for section, keys in (("challenge", ("m", "decoys", "trials", "analytic_n")),
                          ("keyexchange", ("family", "candidates", "window", "unrelated"))):
        d = dict(getattr(rc, section))
        for k in keys:
            v = getattr(args, k, None)
            if v is not None and v is not False:
                d[k] = v
        setattr(rc, section, d)
    rc.validate()
    return rc


def _csv_or_json(fmt: str, obj, meta) -> tuple[str, str]:
    return ("csv", obj.to_csv(meta)) if fmt == "csv" else ("json", obj.to_json(meta))


def _dump(d: dict) -> str:
    return json.dumps(d, sort_keys=True, indent=2) + "\n"


# -- simulate ---------------------------------------------------------------

def _simulate_replica(rc: RunConfig, seed: int) -> dict:
    params = rc.population_params(seed)
    pop = bootstrap(params)
    traj = pop.run(rc.burn_in(), rc.snapshot_every)
    hist = pairwise_match_distribution(pop, params_tag=f"N={params.max_size},parents={params.parent_count}")
    overlay = overlay_memory_factor(traj, params.genome.p_mutate, 1.0, normalizer=params.parent_count)
    events = [e.to_json() for e in pop.events]
    return {"traj": traj, "hist": hist, "overlay": overlay, "events": events}


def cmd_simulate(rc: RunConfig) -> dict[str, str]:
    if rc.replicas == 1:
        seeds = [rc.seed]
    else:
        seeds = [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(rc.seed).spawn(rc.replicas)]
    if rc.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=rc.jobs) as ex:
            results = list(ex.map(_simulate_replica, [rc] * len(seeds), seeds))
    else:
        results = [_simulate_replica(rc, s) for s in seeds]
    files = {}
    for r, (seed, res) in enumerate(zip(seeds, results)):
        meta = {**rc.meta(), "replica": r, "replica_seed": seed}
        sfx = "" if len(seeds) == 1 else f"_r{r}"
        ext, text = _csv_or_json(rc.format, res["traj"], meta)
        files[f"trajectory{sfx}.{ext}"] = text
        ext, text = _csv_or_json(rc.format, res["hist"], meta)
        files[f"histogram{sfx}.{ext}"] = text
        if rc.format == "csv":
            rows = "".join(f"{c},{v!r}\n" for c, v in res["overlay"])
            header = "# " + json.dumps(meta, sort_keys=True) + "\nclock,memory_factor\n"
            files[f"memory_factor{sfx}.csv"] = header + rows
        else:
            files[f"memory_factor{sfx}.json"] = _dump({"meta": meta, "points": res["overlay"]})
        files[f"events{sfx}.jsonl"] = json.dumps({"meta": meta}, sort_keys=True) + "\n" + "".join(
            e + "\n" for e in res["events"])
    return files


# -- keyexchange ------------------------------------------------------------

def cmd_keyexchange(rc: RunConfig) -> dict[str, str]:
    kx = {"family": "identity", "candidates": 100, "window": 10, "unrelated": False, **rc.keyexchange}
    params = rc.population_params()
    gp = params.genome
    pop = bootstrap(params)
    pop.run(rc.burn_in())
    rng = np.random.default_rng(np.random.SeedSequence([rc.seed, 1]))
    ids = pop.ids
    i, j = rng.choice(ids.size, size=2, replace=False)
    x = pop.genomes[i]
    y = rng.integers(0, gp.size, size=gp.n) if kx["unrelated"] else pop.genomes[j]
    g = CodeTable.random(gp.size, rng)
    if kx["family"] == "identity":
        phi = IndexPermutation.identity(gp.n)
        cands = [phi]
    elif kx["family"] == "random":
        phi = IndexPermutation.random(gp.n, rng)
        cands = random_candidates(gp.n, kx["candidates"], rng, truth=phi)
    elif kx["family"] == "block":
        phi = IndexPermutation.block_local(gp.n, kx["window"], rng)
        cands = block_local_candidates(gp.n, kx["window"], kx["candidates"], rng, truth=phi)
    else:
        raise UsageError(f"unknown permutation family {kx['family']!r}")
    bundle = encode(x, g, phi)
    rec = recover_permutation(bundle.payload, y, cands, bundle.verification_digest, size=gp.size)
    table = conditional_table(bundle.payload, y, phi, gp.size)
    guess = recover_code_table(table)
    report = {
        "meta": rc.meta(),
        "sender": int(ids[i]), "receiver": None if kx["unrelated"] else int(ids[j]),
        "match_count": int(np.count_nonzero(x == y)),
        "family": kx["family"], "candidates": len(cands),
        "verified": rec.verified,
        "code_table_recovered": bool(rec.verified and rec.code_table == g),
        "true_phi_rank": next(r for r, (k, _) in enumerate(rec.ranking) if cands[k] == phi) + 1,
        "mutual_information_true_phi": mutual_information(bundle.payload, y, phi, gp.size),
        "conditional_entropy_true_phi": conditional_entropy(bundle.payload, y, phi, gp.size),
        "top_ranking": [[k, s] for k, s in rec.ranking[:5]],
        "table_code_guess_correct": bool(guess.code_table == g),
        "min_row_confidence": float(guess.confidence[table.row_totals > 0].min()),
    }
    alphabet = gp.alphabet if gp.alphabet.is_textual else None
    files = {"keyexchange.json": _dump(report), "conditional_table.json": table.to_json() + "\n"}
    files["conditional_table.csv"] = "# " + json.dumps(rc.meta(), sort_keys=True) + "\n" + table.to_csv(alphabet)
    return files


# -- challenge --------------------------------------------------------------

def analytic_block(n: int, I: int, p_rel=Fraction(1, 3)) -> dict:
    model = PosteriorModel(p_rel, I)
    region_count, region_mass = agreement_region(2, PosteriorModel(p_rel, I))
    wr = work_ratio(n, model, Fraction(1, 2))
    return {
        "two_element": {"search_space": I**2, "agreement_region_count": region_count,
                        "agreement_region_mass": float(region_mass),
                        "prefix_for_half_mass": prefix_count(2, model, Fraction(1, 2))},
        "search_space_table": [{"k": k, "N_k": str(search_space_size(n, k, I)),
                                "pmf_relative": binomial_pmf(k, n, float(model.p)),
                                "pmf_unrelated": binomial_pmf(k, n, 1 / I)} for k in range(n + 1)],
        "work_ratio": {"n": n, "alphabet_size": I, "p_rel": str(model.p),
                       "uniform_count": str(wr.uniform_count), "relative_count": str(wr.relative_count),
                       "ratio": float(wr.ratio), "reported_order_of_magnitude": 1000 if I == 26 else None},
    }


def challenge_trials(pop, m: int, n_decoys: int, trials: int, rng: np.random.Generator) -> dict:
    gp = pop.params.genome
    I = gp.size
    G = pop.genomes
    p_rel = float(pairwise_matches(G, rng).mean()) / gp.n
    model = PosteriorModel(p_rel, I)
    rel, ali, ali_true = [], [], []
    for _ in range(trials):
        i, j = rng.choice(G.shape[0], size=2, replace=False)
        idx = rng.choice(gp.n, size=m, replace=False)
        ch = issue_challenge(G[i], idx, n_decoys, rng=rng, alphabet_size=I)
        rel.append(respond(G[j], ch.public(), model, I**m))
        stranger = rng.integers(0, I, size=gp.n)
        r = respond(stranger, ch.public(), model, I**m)
        ali.append(r)
        if r.chosen_digest_index == ch.true_index:
            ali_true.append(r.candidates_tested)
    rw = [r.candidates_tested for r in rel]
    aw = [r.candidates_tested for r in ali]
    return {"p_rel": p_rel, "m": m, "n_decoys": n_decoys, "trials": trials,
            "relative_work": rw, "alien_work": aw, "alien_true_hit_work": ali_true,
            "relative_median": float(np.median(rw)), "alien_median": float(np.median(aw)),
            "alien_true_hit_mean": float(np.mean(ali_true)) if ali_true else None}


def cmd_challenge(rc: RunConfig) -> dict[str, str]:
    ch = {"m": 4, "decoys": 0, "trials": 200, "analytic_n": 10, **rc.challenge}
    params = rc.population_params()
    pop = bootstrap(params)
    pop.run(rc.burn_in())
    rng = np.random.default_rng(np.random.SeedSequence([rc.seed, 2]))
    stats = challenge_trials(pop, ch["m"], ch["decoys"], ch["trials"], rng)
    analytic = analytic_block(ch["analytic_n"], params.genome.size)
    files = {"challenge.json": _dump({"meta": rc.meta(), "trials": stats, "analytic": analytic})}
    rows = "".join(f"{r['k']},{r['N_k']},{r['pmf_relative']!r},{r['pmf_unrelated']!r}\n"
                   for r in analytic["search_space_table"])
    files["search_space.csv"] = ("# " + json.dumps(rc.meta(), sort_keys=True)
                                 + "\nk,N_k,pmf_relative,pmf_unrelated\n" + rows)
    return files


# -- attack -----------------------------------------------------------------

PRESETS = ("default", "clone", "random")


def load_scenario(source) -> Scenario:
    if source is None:
        source = "default"
    if isinstance(source, dict):
        return Scenario.from_dict(source)
    if source in PRESETS:
        text = resources.files("genenet.scenarios").joinpath(f"{source}.json").read_text()
    else:
        try:
            text = Path(source).read_text()
        except OSError as e:
            raise UsageError(f"cannot read scenario {source}: {e}") from e
    try:
        return Scenario.from_json(text)
    except (json.JSONDecodeError, ValueError, TypeError) as e:
        raise UsageError(f"bad scenario: {e}") from e


def cmd_attack(rc: RunConfig, with_trace: bool = False) -> dict[str, str]:
    sc = load_scenario(rc.scenario)
    report, net = run_scenario(sc)
    report.meta = {**report.meta, **rc.meta()}
    files = {"report.json": report.to_json()}
    if with_trace:
        files["trace.jsonl"] = "".join(m + "\n" for m in net.trace)
    return files


# -- export -----------------------------------------------------------------

def cmd_export(rc: RunConfig, what: str, n: int, I: int) -> dict[str, str]:
    meta = rc.meta()
    if what == "binomial":
        curves = {"1/26": binomial_reference(n, 1 / 26), "1/3": binomial_reference(n, 1 / 3),
                  "1/2": binomial_reference(n, 1 / 2)}
        if rc.format == "csv":
            return {"binomial_reference.csv": reference_csv(curves, meta)}
        return {"binomial_reference.json": _dump({"meta": meta, "curves": curves})}
    rows = [(k, search_space_size(n, k, I)) for k in range(n + 1)]
    if rc.format == "csv":
        return {"search_space.csv": "# " + json.dumps(meta, sort_keys=True) + "\nk,N_k\n"
                + "".join(f"{k},{v}\n" for k, v in rows)}
    return {"search_space.json": _dump({"meta": meta, "n": n, "alphabet_size": I,
                                        "N_k": {str(k): str(v) for k, v in rows}})}


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--jobs", type=int, help="parallel replicas")

    pop = argparse.ArgumentParser(add_help=False)
    pop.add_argument("--n", type=int, help="genome length")
    pop.add_argument("--alphabet", type=int, help="alphabet size")
    pop.add_argument("--p-mutate", type=float)
    pop.add_argument("--max-size", type=int)
    pop.add_argument("--parents", type=int, help="number of parent-eligible nodes")
    pop.add_argument("--births", type=int, help="births to simulate (default 100 * max-size)")

    p = _Parser(prog="genenet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"genenet {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common, pop], help="evolve a gene pool, export plot data")
    s.add_argument("--snapshot-every", type=int)
    s.add_argument("--replicas", type=int)

    k = sub.add_parser("keyexchange", parents=[common, pop], help="code-table / permutation recovery demo")
    k.add_argument("--family", choices=("identity", "random", "block"))
    k.add_argument("--candidates", type=int)
    k.add_argument("--window", type=int)
    k.add_argument("--unrelated", action="store_true", help="receiver gets an unrelated random genome")

    c = sub.add_parser("challenge", parents=[common, pop], help="relative vs alien work statistics")
    c.add_argument("--m", type=int, help="gene elements per challenge")
    c.add_argument("--decoys", type=int)
    c.add_argument("--trials", type=int)
    c.add_argument("--analytic-n", type=int)

    a = sub.add_parser("attack", parents=[common], help="run a detection scenario")
    a.add_argument("--scenario", help=f"scenario JSON path or preset {PRESETS}")
    a.add_argument("--trace", action="store_true", help="also dump the message trace")

    e = sub.add_parser("export", parents=[common], help="analytic reference data")
    e.add_argument("what", choices=("binomial", "search-space"))
    e.add_argument("--length", type=int, default=10, help="tuple length n")
    e.add_argument("--alphabet", type=int, default=26)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = _load_config(args)
        if args.command == "simulate":
            files = cmd_simulate(rc)
        elif args.command == "keyexchange":
            files = cmd_keyexchange(rc)
        elif args.command == "challenge":
            files = cmd_challenge(rc)
        elif args.command == "attack":
            files = cmd_attack(rc, args.trace)
        else:
            files = cmd_export(rc, args.what, args.length, args.alphabet)
    except UsageError as e:
        print(f"genenet: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as e:  # noqa: BLE001 - any failure mid-run is a runtime error
        print(f"genenet: runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return RUNTIME_ERROR
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    print("\n".join(str(out / name) for name in files))
    return 0


if __name__ == "__main__":
    sys.exit(main())
