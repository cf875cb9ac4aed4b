import json
import subprocess
import sys

import pytest

from genenet.cli import main
from genenet.stats import MatchHistogram, Trajectory

SMALL = ["--max-size", "20", "--births", "400"]


def run(tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    return code, sorted(p.name for p in tmp_path.iterdir()) if tmp_path.exists() else []


def read_meta(text):
    first = text.splitlines()[0]
    return json.loads(first[2:]) if first.startswith("# ") else json.loads(text)["meta"]


def test_simulate_outputs_parse(tmp_path):
    code, names = run(tmp_path, "simulate", *SMALL, "--snapshot-every", "100", "--seed", "3")
    assert code == 0
    assert names == ["events.jsonl", "histogram.csv", "memory_factor.csv", "trajectory.csv"]
    traj = Trajectory.from_csv((tmp_path / "trajectory.csv").read_text())
    assert traj.clocks.tolist() == [0, 100, 200, 300, 400]
    hist = MatchHistogram.from_csv((tmp_path / "histogram.csv").read_text())
    assert hist.n_pairs == 190 and hist.n == 1000
    events = (tmp_path / "events.jsonl").read_text().splitlines()
    assert len(events) == 401 and json.loads(events[1])["clock"] == 1
    meta = read_meta((tmp_path / "trajectory.csv").read_text())
    assert meta["seed"] == 3 and meta["version"].startswith("genenet")


def test_simulate_json_format(tmp_path):
    code, names = run(tmp_path, "simulate", *SMALL, "--format", "json")
    assert code == 0 and "trajectory.json" in names and "histogram.json" in names
    assert Trajectory.from_json((tmp_path / "trajectory.json").read_text()).clocks[-1] == 400


def test_same_seed_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert run(d, "simulate", *SMALL, "--seed", "9")[0] == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]


def test_embedded_config_reproduces(tmp_path):
    a = tmp_path / "a"
    assert run(a, "challenge", *SMALL, "--m", "2", "--trials", "5", "--seed", "4")[0] == 0
    meta = read_meta((a / "challenge.json").read_text())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(meta["config"]))
    b = tmp_path / "b"
    assert run(b, "challenge", "--config", str(cfg))[0] == 0
    assert (a / "challenge.json").read_bytes() == (b / "challenge.json").read_bytes()
    assert (a / "search_space.csv").read_bytes() == (b / "search_space.csv").read_bytes()


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"population": {"max_size": 10}, "births": 50, "seed": 1}))
    out = tmp_path / "o"
    assert run(out, "simulate", "--config", str(cfg), "--seed", "2", "--max-size", "12")[0] == 0
    meta = read_meta((out / "trajectory.csv").read_text())
    assert meta["seed"] == 2 and meta["config"]["population"]["max_size"] == 12 and meta["config"]["births"] == 50


def test_parent_enrichment(tmp_path):
    means = {}
    for parents in (10, 100):
        d = tmp_path / str(parents)
        assert run(d, "simulate", "--max-size", "100", "--parents", str(parents), "--births", "3000")[0] == 0
        means[parents] = MatchHistogram.from_csv((d / "histogram.csv").read_text()).mean()
    assert means[10] > means[100]


def test_replicas_parallel_matches_serial(tmp_path):
    serial, parallel = tmp_path / "s", tmp_path / "p"
    assert run(serial, "simulate", *SMALL, "--replicas", "2")[0] == 0
    assert run(parallel, "simulate", *SMALL, "--replicas", "2", "--jobs", "2")[0] == 0
    names = sorted(p.name for p in serial.iterdir())
    assert "trajectory_r1.csv" in names
    assert all((serial / n).read_bytes() == (parallel / n).read_bytes() for n in names)


def test_keyexchange_identity_family(tmp_path):
    code, names = run(tmp_path, "keyexchange", *SMALL, "--parents", "5", "--seed", "1")
    assert code == 0 and names == ["conditional_table.csv", "conditional_table.json", "keyexchange.json"]
    rep = json.loads((tmp_path / "keyexchange.json").read_text())
    assert rep["verified"] and rep["code_table_recovered"]
    rows = [r.split(",") for r in (tmp_path / "conditional_table.csv").read_text().splitlines()[2:]]
    for r in rows:
        pct = sorted(int(v) for v in r[1:])
        if sum(pct):
            assert pct[-1] > 2 * pct[-2]


def test_keyexchange_families_and_unrelated(tmp_path):
    for fam in ("random", "block"):
        d = tmp_path / fam
        assert run(d, "keyexchange", *SMALL, "--parents", "5", "--family", fam, "--candidates", "10")[0] == 0
        assert json.loads((d / "keyexchange.json").read_text())["verified"]
    d = tmp_path / "u"
    assert run(d, "keyexchange", *SMALL, "--unrelated")[0] == 0
    rep = json.loads((d / "keyexchange.json").read_text())
    assert rep["verified"] is False and rep["receiver"] is None


@pytest.mark.slow
def test_keyexchange_identity_recovery_rate(tmp_path):
    ok = 0
    for seed in range(100):
        d = tmp_path / str(seed)
        assert run(d, "keyexchange", "--max-size", "20", "--parents", "5", "--births", "1000", "--seed",
                   str(seed))[0] == 0
        ok += json.loads((d / "keyexchange.json").read_text())["code_table_recovered"]
    assert ok >= 95


def test_challenge_report(tmp_path):
    code, names = run(tmp_path, "challenge", "--max-size", "30", "--parents", "5", "--births", "1500",
                      "--m", "3", "--trials", "15")
    assert code == 0 and names == ["challenge.json", "search_space.csv"]
    rep = json.loads((tmp_path / "challenge.json").read_text())
    two = rep["analytic"]["two_element"]
    assert two["agreement_region_count"] == 51 and round(two["agreement_region_mass"], 2) == 0.56
    assert two["prefix_for_half_mass"] == 45
    table = {r["k"]: int(r["N_k"]) for r in rep["analytic"]["search_space_table"]}
    assert table[10] == 1 and sum(table.values()) == 26**10
    assert rep["trials"]["relative_median"] < rep["trials"]["alien_median"]


def test_attack_preset(tmp_path):
    code, names = run(tmp_path, "attack", "--scenario", "clone", "--trace")
    assert code == 0 and names == ["report.json", "trace.jsonl"]
    rep = json.loads((tmp_path / "report.json").read_text())
    assert 0 <= rep["tpr"] <= 1 and 0 <= rep["fpr"] <= 1
    flags = {tuple(p) for p in rep["clone_flags"]}
    for adv in rep["adversaries"]:
        if adv["kind"] == "clone_of":
            assert (min(adv["id"], adv["victim"]), max(adv["id"], adv["victim"])) in flags


def test_attack_random_preset_tpr(tmp_path):
    assert run(tmp_path, "attack", "--scenario", "random")[0] == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["tpr"] >= 0.95


def test_export(tmp_path):
    assert run(tmp_path, "export", "binomial")[0] == 0
    lines = (tmp_path / "binomial_reference.csv").read_text().splitlines()
    assert lines[1] == "p,k,pmf" and len(lines) == 2 + 3 * 11
    assert run(tmp_path, "export", "search-space", "--format", "json", "--length", "4", "--alphabet", "4")[0] == 0
    d = json.loads((tmp_path / "search_space.json").read_text())
    assert sum(int(v) for v in d["N_k"].values()) == 4**4


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GENENET_OUT", str(tmp_path / "env"))
    assert main(["export", "binomial"]) == 0
    assert (tmp_path / "env" / "binomial_reference.csv").exists()


def test_unknown_flag_exits_1(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--bogus", "--out", str(tmp_path / "x")])
    assert e.value.code == 1
    assert not (tmp_path / "x").exists()
    assert "bogus" in capsys.readouterr().err


@pytest.mark.parametrize("cfg", ['{"population": {"max_size": 1}}', '{"nonsense": 1}', "[1, 2]", "{not json"])
def test_malformed_config_exits_1(tmp_path, cfg, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(cfg)
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "x")]) == 1
    assert not (tmp_path / "x").exists()
    assert "error" in capsys.readouterr().err


def test_bad_values_exit_1(tmp_path):
    assert main(["simulate", "--births", "-1", "--out", str(tmp_path / "x")]) == 1
    assert main(["simulate", "--parents", "500", "--out", str(tmp_path / "x")]) == 1
    assert main(["attack", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 1
    assert not (tmp_path / "x").exists()


def test_runtime_failure_exits_2_without_outputs(tmp_path):
    sc = tmp_path / "sc.json"
    # asks for a stale copy older than the whole run
    sc.write_text(json.dumps({"population": {"max_size": 10, "parent_count": 5}, "births": 100,
                              "adversaries": [{"kind": "stale_copy", "count": 1, "age_births": 5000}],
                              "trials": {"calibration": 5, "legitimate": 2, "committee_size": 2}}))
    assert main(["attack", "--scenario", str(sc), "--out", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "genenet.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("genenet")
