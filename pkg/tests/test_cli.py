import csv
import json

import numpy as np
import pytest

from contest_opt.cli import ConfigError, main, parse_config

POWER2 = {"distribution": {"family": "power", "p": 2}, "n": 2, "k": 1, "eta": 1.0, "grid": 600,
          "mc": {"samples": 5000, "probes": 11, "resolution": 41}}
UNIFORM = {"distribution": {"family": "uniform"}, "n": 2, "k": 1, "grid": 600}


def write(tmp_path, name, obj):
    f = tmp_path / name
    f.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return f


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_writes_three_files(tmp_path):
    cfg = write(tmp_path, "p.json", {**POWER2, "alpha": 0.9})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    regions = read_csv(tmp_path / "o" / "regions.csv")
    assert [r["region"] for r in regions] == ["no-tension", "no-effort", "efficient"]
    curves = read_csv(tmp_path / "o" / "curves.csv")
    assert list(curves[0]) == ["theta", "Q", "U", "Q_E", "region"]
    assert len(curves) == 601
    res = json.loads((tmp_path / "o" / "result.json").read_text())
    assert res["alpha"] == 0.9 and res["grid"] == 600


def test_uniform_solve_is_one_no_tension_region(tmp_path):
    cfg = write(tmp_path, "u.json", {**UNIFORM, "alpha": 0.5})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    regions = read_csv(tmp_path / "regions.csv")
    assert [r["region"] for r in regions] == ["no-tension"]


def test_csv_uses_twelve_significant_digits(tmp_path):
    cfg = write(tmp_path, "u.json", {**UNIFORM, "grid": 700})
    main(["solve", "--config", str(cfg), "--out", str(tmp_path)])
    row = read_csv(tmp_path / "curves.csv")[1]
    assert row["theta"] == f"{1 / 700:.12g}"
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["curves"][1]["theta"] == pytest.approx(1 / 700, rel=1e-15)


@pytest.mark.parametrize("body, field", [
    ("{not json", "config"),
    ({"alpha": 1.5}, "alpha"),
    ({"eta": -1}, "eta"),
    ({"n": 3, "k": 3}, "n, k"),
    ({"grid": 10}, "grid"),
    ({"method": "simplex"}, "method"),
    ({"distribution": {"family": "zeta"}}, "distribution"),
    ({"mc": {"samples": 10}}, "mc.samples"),
    ({"colour": "blue"}, "colour"),
    ({"alpha": [0.2, 0.4]}, "alpha"),
])
def test_config_errors_exit_two_and_name_field(tmp_path, capsys, body, field):
    cfg = write(tmp_path, "bad.json", body)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert f"error: {field}" in capsys.readouterr().err


def test_missing_config_file_exits_two(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 2


def test_thread_cap_is_validated(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CONTEST_OPT_THREADS", "zero")
    cfg = write(tmp_path, "u.json", UNIFORM)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "CONTEST_OPT_THREADS" in capsys.readouterr().err


def test_flags_override_config():
    cfg = parse_config(POWER2, {"method": "lp", "grid": 300, "mc": {**POWER2["mc"], "seed": 9}})
    assert cfg.method == "lp" and cfg.grid == 300 and cfg.mc.seed == 9
    with pytest.raises(ConfigError, match="^sweep.values"):
        parse_config({**UNIFORM, "sweep": {"param": "n", "values": []}})


def test_compare_uniform_pair_and_pure_efficiency(tmp_path):
    cfg = write(tmp_path, "u.json", {**UNIFORM, "alpha": [0.5, 1.0]})
    assert main(["compare", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "comparison.csv")
    assert {"ratio", "delta_bound", "V_opt", "V_WTA", "V_VCG"} <= set(rows[0])
    for r in rows:
        assert abs(float(r["ratio"]) - 1) <= 1e-3
        assert float(r["V_VCG"]) <= float(r["V_WTA"]) + 1e-12
    assert abs(float(rows[1]["V_opt"]) - float(rows[1]["V_WTA"])) <= 1e-3
    assert float(rows[0]["delta_bound"]) == pytest.approx(1.0969, abs=1e-4)


def test_compare_many_agents_gap(tmp_path):
    cfg = write(tmp_path, "u.json", {**UNIFORM, "n": 100, "alpha": 0.5})
    main(["compare", "--config", str(cfg), "--out", str(tmp_path)])
    assert float(read_csv(tmp_path / "comparison.csv")[0]["ratio"]) > 1.05


def test_sweep_over_n_and_determinism(tmp_path, monkeypatch):
    body = {**POWER2, "alpha": 0.5, "grid": 400, "sweep": {"param": "n", "values": [5, 10, 20, 50, 100]}}
    cfg = write(tmp_path, "s.json", body)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("CONTEST_OPT_THREADS", "4")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "sweep.csv")
    nt = [float(r["no_tension_measure"]) for r in rows]
    assert np.all(np.diff(nt) > 0) and nt[-1] < 1
    assert all(r["cutoffs"] for r in rows)
    assert len(list((tmp_path / "a" / "sweep").glob("n-*.json"))) == 5


def test_sweep_alpha_frontier_is_concave(tmp_path):
    body = {**POWER2, "grid": 400, "sweep": {"param": "alpha", "values": [0.1, 0.3, 0.5, 0.7, 0.9]}}
    main(["sweep", "--config", str(write(tmp_path, "s.json", body)), "--out", str(tmp_path)])
    rows = sorted(read_csv(tmp_path / "sweep.csv"), key=lambda r: float(r["mean_utility"]))
    u = np.array([float(r["mean_utility"]) for r in rows])
    e = np.array([float(r["efficiency"]) for r in rows])
    keep = np.concatenate(([True], np.diff(u) > 1e-7))
    slopes = np.diff(e[keep]) / np.diff(u[keep])
    assert np.all(np.diff(slopes) <= 1e-6)


def test_sweep_over_scale_z(tmp_path):
    body = {**UNIFORM, "alpha": 0.5, "grid": 400, "sweep": {"param": "z", "values": [1, 10, 50]}}
    main(["sweep", "--config", str(write(tmp_path, "s.json", body)), "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "sweep.csv")
    assert [int(r["n"]) for r in rows] == [2, 20, 100]
    assert [int(r["k"]) for r in rows] == [1, 10, 50]


def test_solve_then_verify_round_trip(tmp_path):
    cfg = write(tmp_path, "p.json", {**POWER2, "alpha": 0.9})
    main(["solve", "--config", str(cfg), "--out", str(tmp_path)])
    assert main(["verify", str(tmp_path / "result.json"), "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["passed"] and rep["deviation"]["passed"]


def _tamper(tmp_path, edit):
    cfg = write(tmp_path, "u.json", {**UNIFORM, "alpha": 0.5})
    main(["solve", "--config", str(cfg), "--out", str(tmp_path)])
    res = json.loads((tmp_path / "result.json").read_text())
    edit(res["curves"])
    return write(tmp_path, "edited.json", res)


def test_verify_catches_allocation_above_efficient(tmp_path):
    def bump(curves):
        for c in curves[-30:]:
            c["Q"] = min(1.0, c["Q"] + 0.02)

    f = _tamper(tmp_path, bump)
    assert main(["verify", str(f), "--no-scan"]) == 1
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["feasibility"]["passed"] is False


def test_verify_catches_steep_utility(tmp_path):
    def steep(curves):
        for c in curves:
            c["U"] = min(c["Q"], 2.0 * max(c["theta"] - 0.5, 0.0))

    f = _tamper(tmp_path, steep)
    assert main(["verify", str(f), "--no-scan"]) == 1
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["ic"]["passed"] is False


def test_verify_rejects_non_result(tmp_path):
    f = write(tmp_path, "x.json", {"hello": 1})
    assert main(["verify", str(f)]) == 2


def test_simulate_writes_columns_and_is_seeded(tmp_path):
    cfg = write(tmp_path, "p.json", {**POWER2, "alpha": 0.5})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "3"]) == 0
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "3"])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "4"])
    rows = read_csv(tmp_path / "a" / "simulate.csv")
    assert list(rows[0]) == ["theta", "Q_hat", "Q_se", "U_hat", "U_se", "max_deviation_gain"]
    assert len(rows) == 11
    a = (tmp_path / "a" / "simulate.csv").read_bytes()
    assert a == (tmp_path / "b" / "simulate.csv").read_bytes()
    assert a != (tmp_path / "c" / "simulate.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "simulate.json").read_text())
    assert summary["certified"] and summary["seed"] == 3


def test_simulate_vcg(tmp_path):
    body = {**UNIFORM, "simulate": "vcg", "mc": {"samples": 20000, "probes": 5}}
    assert main(["simulate", "--config", str(write(tmp_path, "v.json", body)), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "simulate.csv")
    assert float(rows[-1]["U_hat"]) == pytest.approx(0.5, abs=0.01)


def test_simulate_needs_two_agents(tmp_path, capsys):
    cfg = write(tmp_path, "p.json", {**POWER2, "n": 3})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "n, k" in capsys.readouterr().err


def test_solve_discrete_model(tmp_path):
    body = {"types": [0, 1], "probs": [0.5, 0.5], "Q": [0.2, 0.8], "cost": {"family": "quadratic", "c": 1.0}}
    assert main(["solve", "--config", str(write(tmp_path, "d.json", body)), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["signals"][1] == pytest.approx(1.2**0.5, abs=1e-12)
    assert res["ic_passed"]
    bad = {**body, "Q": [0.8, 0.2]}
    assert main(["solve", "--config", str(write(tmp_path, "e.json", bad)), "--out", str(tmp_path)]) == 2


def test_negative_seed_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "p.json", POWER2)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--seed", "-1"]) == 2
    assert "mc.seed" in capsys.readouterr().err
