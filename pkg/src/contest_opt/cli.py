"""Command-line entry point: ``contest-opt {solve,compare,sweep,verify,simulate}``.

Experiments are described by a JSON config::

    {"distribution": {"family": "power", "p": 2}, "n": 2, "k": 1, "eta": 1.0,
     "alpha": 0.5, "method": "auto", "grid": 2000,
     "mc": {"samples": 100000, "seed": 0, "probes": 33, "resolution": 201},
     "sweep": {"param": "n", "values": [5, 10, 20]}}

Exit codes: 0 success, 1 a check failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import nonconvergence_bound, vcg_interim_utility, wta_objective, wta_pair
from .distributions import DistributionSpec, DomainError, ParameterError
from .mechanism import (
    PreconditionError,
    Region,
    ShapeError,
    check_ic,
    check_interim_feasibility,
    expost_rule_pair,
    signal_strategy,
)
from .nonlinear import CostSpec, DiscreteTypeModel, construct_discrete_contest, global_ic_check_discrete
from .simulate import McConfig, deviation_scan, mc_interim_estimate, probe_types, simulate_vcg
from .solver import SolveConfig, SolveResult, replicate_economy, solve

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2
SWEEP_PARAMS = ("n", "z", "alpha")
KNOWN_KEYS = {"distribution", "n", "k", "eta", "alpha", "method", "grid", "mc", "sweep", "eps", "out",
              "simulate", "types", "probs", "Q", "cost"}


class ConfigError(ValueError):
    """Configuration problem; the message starts with the offending field."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    spec: DistributionSpec
    n: int = 2
    k: int = 1
    eta: float = 1.0
    alphas: tuple[float, ...] = (0.5,)
    method: str = "auto"
    grid: int = 2000
    mc: McConfig = field(default_factory=McConfig)
    sweep_param: str | None = None
    sweep_values: tuple = ()
    eps: float = 0.1
    simulate: str = "optimal"
    out: Path = Path(".")

    def solve_config(self, alpha: float | None = None) -> SolveConfig:
        a = self.alphas[0] if alpha is None else alpha
        return SolveConfig(self.spec, n=self.n, k=self.k, eta=self.eta, alpha=a, M=self.grid, method=self.method)

    @property
    def alpha(self) -> float:
        if len(self.alphas) != 1:
            raise ConfigError("alpha: this command needs a single value, not a list")
        return self.alphas[0]

    def sweep_configs(self) -> list[SolveConfig]:
        base = self.solve_config()
        if self.sweep_param == "n":
            return [base.replace(n=int(v)) for v in self.sweep_values]
        if self.sweep_param == "z":
            return [replicate_economy(base, int(v)) for v in self.sweep_values]
        return [base.replace(alpha=float(v)) for v in self.sweep_values]


def _number(d, key, kind, default):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return kind(v)


def parse_config(d: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a config mapping; every error names the offending field."""
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = sorted(set(d) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown config field")
    d = {**d, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    try:
        spec = DistributionSpec.from_dict(d.get("distribution", {"family": "uniform"}))
    except (ParameterError, DomainError, TypeError, ValueError) as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith("distribution") else f"distribution: {msg}") from None
    alpha = d.get("alpha", 0.5)
    alphas = tuple(alpha) if isinstance(alpha, list) else (alpha,)
    if not alphas or any(isinstance(a, bool) or not isinstance(a, (int, float)) for a in alphas):
        raise ConfigError("alpha: expected a number or a non-empty list of numbers")
    mc = d.get("mc", {})
    if not isinstance(mc, dict):
        raise ConfigError("mc: expected an object")
    try:
        mcfg = McConfig(samples=_number(mc, "samples", int, 100_000), seed=_number(mc, "seed", int, 0),
                        resolution=_number(mc, "resolution", int, 201), probes=_number(mc, "probes", int, 33),
                        workers=thread_cap())
    except (ConfigError, ParameterError) as exc:
        raise ConfigError(f"mc.{exc}") from None
    sweep = d.get("sweep")
    param, values = None, ()
    if sweep is not None:
        if not isinstance(sweep, dict) or sweep.get("param") not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param: expected one of {SWEEP_PARAMS}")
        values = tuple(sweep.get("values", ()))
        if not values:
            raise ConfigError("sweep.values: need a non-empty list")
        param = sweep["param"]
    simulate = d.get("simulate", "optimal")
    if simulate not in ("optimal", "vcg"):
        raise ConfigError("simulate: expected 'optimal' or 'vcg'")
    cfg = ExperimentConfig(spec, _number(d, "n", int, 2), _number(d, "k", int, 1), _number(d, "eta", float, 1.0),
                           tuple(float(a) for a in alphas), str(d.get("method", "auto")),
                           _number(d, "grid", int, 2000), mcfg, param, values, _number(d, "eps", float, 0.1),
                           simulate, Path(d.get("out", ".")))
    try:
        for a in cfg.alphas:
            cfg.solve_config(a)
        if param is not None:
            cfg.sweep_configs()
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def thread_cap() -> int:
    raw = os.environ.get("CONTEST_OPT_THREADS", "1")
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"CONTEST_OPT_THREADS: expected a positive integer, got {raw!r}") from None
    if v < 1:
        raise ConfigError(f"CONTEST_OPT_THREADS: expected a positive integer, got {raw!r}")
    return v


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON in {path}: {exc}") from None


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return write_atomic(path, buf.getvalue())


def write_json(path: Path, obj) -> Path:
    return write_atomic(path, json.dumps(obj, indent=2, allow_nan=True) + "\n")


def _log(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cutoffs(res: SolveResult) -> list[float]:
    return [iv.hi for iv in res.regions.intervals[:-1]]


def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    res = solve(cfg.solve_config(cfg.alpha))
    p = res.pair
    labels = res.regions.label(p.theta) if res.regions.intervals else np.full(p.theta.size, "", dtype=object)
    write_json(out / "result.json", res.to_dict())
    write_csv(out / "curves.csv", ["theta", "Q", "U", "Q_E", "region"],
              zip(p.theta, p.Q, p.U, p.QE, labels))
    write_csv(out / "regions.csv", ["lo", "hi", "region", "measure", "residual"],
              [(iv.lo, iv.hi, iv.tag.value, float(p.spec.cdf(iv.hi) - p.spec.cdf(iv.lo)), iv.residual)
               for iv in res.regions.intervals])
    _log(f"objective {res.objective:.10g} ({res.method}); regions: "
         + ", ".join(t.value for t in res.regions.tags))
    return EXIT_OK


def cmd_solve_discrete(d: dict, out: Path) -> int:
    try:
        model = DiscreteTypeModel.from_dict(d)
        cost = CostSpec.from_dict(d.get("cost", {}))
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    con = construct_discrete_contest(model, cost)
    ic = global_ic_check_discrete(model, cost, con.signals, con.utility)
    write_json(out / "result.json", {**model.to_dict(), "cost": cost.to_dict(), "signals": con.signals.tolist(),
                                     "utility": con.utility.tolist(), "ic_passed": ic.passed,
                                     "ic_worst_gain": ic.worst_gain})
    write_csv(out / "contest.csv", ["theta", "prob", "Q", "signal", "effort", "U"],
              zip(model.types, model.probs, model.Q, con.signals, con.efforts, con.utility))
    return EXIT_OK if ic.passed else EXIT_CHECK


def compare_row(cfg: ExperimentConfig, alpha: float) -> dict:
    sc = cfg.solve_config(alpha)
    res = solve(sc)
    wta = wta_pair(cfg.spec, cfg.n, cfg.k, cfg.eta, alpha, cfg.grid)
    g = wta.grid
    us = vcg_interim_utility(cfg.spec, cfg.n, cfg.k, cfg.eta, g.points)
    eff_wta = wta.efficiency()
    v_wta = alpha * eff_wta + (1 - alpha) * wta.mean_utility()
    v_vcg = alpha * eff_wta + (1 - alpha) * g.expect(us)
    delta = math.nan
    if 0 < alpha < 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            delta = nonconvergence_bound(cfg.spec.hi, alpha, cfg.eps)
    return {
        "alpha": alpha, "n": cfg.n, "k": cfg.k,
        "V_opt": res.objective, "V_WTA": v_wta, "V_VCG": v_vcg,
        "ratio": res.objective / v_wta if v_wta > 0 else math.nan,
        "eff_opt": res.pair.efficiency(), "eff_WTA": eff_wta, "eff_VCG": eff_wta,
        "U_opt": res.pair.mean_utility(), "U_WTA": wta.mean_utility(), "U_VCG": g.expect(us),
        "delta_bound": delta,
    }


def cmd_compare(cfg: ExperimentConfig, out: Path) -> int:
    rows = [compare_row(cfg, a) for a in cfg.alphas]
    write_csv(out / "comparison.csv", list(rows[0]), [list(r.values()) for r in rows])
    for r in rows:
        _log(f"alpha={r['alpha']:g}: V_opt/V_WTA = {r['ratio']:.6g}")
    return EXIT_OK


SWEEP_HEADER = ["param", "value", "n", "k", "eta", "alpha", "method", "objective", "V_WTA", "ratio",
                "efficiency", "mean_utility", "no_tension_measure", "regions", "cutoffs"]


def _sweep_one(param, value, sc: SolveConfig, out: Path) -> list:
    res = solve(sc)
    v_wta = wta_objective(sc.spec, sc.n, sc.k, sc.eta, sc.alpha, sc.M)
    write_json(out / "sweep" / f"{param}-{_fmt(value)}.json", res.to_dict())
    return [param, value, sc.n, sc.k, sc.eta, sc.alpha, res.method, res.objective, v_wta,
            res.objective / v_wta if v_wta > 0 else math.nan, res.pair.efficiency(), res.pair.mean_utility(),
            res.no_tension_measure, ";".join(t.value for t in res.regions.tags),
            ";".join(_fmt(c) for c in _cutoffs(res))]


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.sweep_param is None:
        raise ConfigError("sweep: missing; expected {\"param\": ..., \"values\": [...]}")
    jobs = list(zip(cfg.sweep_values, cfg.sweep_configs()))
    workers = min(cfg.mc.workers, len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda j: _sweep_one(cfg.sweep_param, j[0], j[1], out), jobs))
    else:
        rows = [_sweep_one(cfg.sweep_param, v, sc, out) for v, sc in jobs]
    write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    return EXIT_OK


def verify_result(res: SolveResult, mc: McConfig | None = None) -> dict:
    """Static IC and feasibility checks, plus a deviation scan for two agents."""
    p = res.pair
    report = {"ic": None, "feasibility": None, "bounds": None, "deviation": None}
    ic = check_ic(p)
    report["ic"] = {"passed": ic.passed, "worst": ic.worst, "where": ic.where}
    inb = bool(np.all(p.Q >= -1e-9) and np.all(p.Q <= 1 + 1e-9) and np.all(np.diff(p.Q) >= -1e-9))
    report["bounds"] = {"passed": inb}
    if inb:
        fe = check_interim_feasibility(p.Q, p.grid, p.n, p.k)
        report["feasibility"] = {"passed": fe.passed, "worst_slack": fe.worst_slack, "where": fe.where}
    else:
        report["feasibility"] = {"passed": False, "reason": "allocation outside [0, 1] or decreasing"}
    static_ok = ic.passed and report["feasibility"]["passed"] and inb
    if mc is not None and p.n == 2 and p.k == 1 and static_ok:
        try:
            rule = expost_rule_pair(p, res.regions if res.regions.intervals else None)
            rep = deviation_scan(rule, signal_strategy(p, res.regions), p.spec, p.eta, mc,
                                 probes=probe_types(p.spec, mc.probes, p.grid))
            report["deviation"] = {"passed": rep.certified, "max_gain": rep.max_gain,
                                   "worst_margin": rep.worst_margin, "samples": mc.samples}
        except (PreconditionError, ShapeError, RuntimeError) as exc:
            report["deviation"] = {"passed": False, "reason": str(exc)}
    else:
        why = "static checks failed" if not static_ok else "needs a two-agent single-item result"
        report["deviation"] = {"passed": None, "reason": f"skipped: {why}" if mc is not None else "skipped"}
    report["passed"] = bool(static_ok and report["deviation"]["passed"] is not False)
    return report


def cmd_verify(result_path, out: Path, mc: McConfig | None) -> int:
    d = load_json(result_path)
    try:
        res = SolveResult.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"result: not a solve result file ({exc})") from None
    report = verify_result(res, mc)
    write_json(out / "verify.json", report)
    for name in ("bounds", "ic", "feasibility", "deviation"):
        r = report[name]
        state = {True: "pass", False: "FAIL", None: "skip"}[r["passed"]]
        _log(f"{name:12s} {state}")
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    mc = cfg.mc
    if cfg.simulate == "vcg":
        est = simulate_vcg(cfg.spec, cfg.n, cfg.k, cfg.eta, mc)
        gains = np.full(est.theta.size, math.nan)
        exact = vcg_interim_utility(cfg.spec, cfg.n, cfg.k, cfg.eta, est.theta)
        ok = bool(np.all(np.abs(est.U_hat - exact) <= 3 * est.U_se + 1e-12))
        summary = {"mechanism": "vcg", "utility_within_3se": ok}
    else:
        if cfg.n != 2 or cfg.k != 1:
            raise ConfigError("n, k: simulating the optimal ex-post rule needs n=2, k=1")
        res = solve(cfg.solve_config(cfg.alpha))
        p = res.pair
        rule = expost_rule_pair(p, res.regions)
        strat = signal_strategy(p, res.regions)
        probes = probe_types(cfg.spec, mc.probes, p.grid)
        est = mc_interim_estimate(rule, strat, cfg.spec, mc, eta=cfg.eta, probes=probes)
        rep = deviation_scan(rule, strat, cfg.spec, cfg.eta, mc, probes=probes)
        gains = rep.best_gain
        within = est.within(np.interp(probes, p.theta, p.Q), floor=1e-12)
        ok = bool(rep.certified)
        summary = {"mechanism": "optimal", "certified": rep.certified, "max_gain": rep.max_gain,
                   "worst_margin": rep.worst_margin, "interim_within_3se": int(within.sum()),
                   "probes": int(probes.size)}
    summary.update(samples=mc.samples, seed=mc.seed)
    write_csv(out / "simulate.csv", ["theta", "Q_hat", "Q_se", "U_hat", "U_se", "max_deviation_gain"],
              zip(est.theta, est.Q_hat, est.Q_se, est.U_hat, est.U_se, gains))
    write_json(out / "simulate.json", summary)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contest-opt", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", type=Path, required=needs_config, help="experiment JSON")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed")
        p.add_argument("--method", choices=("lp", "closed-form", "auto"), default=None)
        p.add_argument("--grid", type=int, default=None, help="number of grid cells")

    for name, text in (("solve", "solve one configuration"),
                       ("compare", "optimal vs winner-takes-all vs VCG format"),
                       ("sweep", "solve over a list of n, z or alpha values"),
                       ("simulate", "Monte Carlo check of the optimal ex-post rule")):
        common(sub.add_parser(name, help=text))
    v = sub.add_parser("verify", help="IC, feasibility and deviation checks of a result file")
    v.add_argument("result", type=Path)
    common(v, needs_config=False)
    v.add_argument("--no-scan", action="store_true", help="skip the Monte Carlo deviation scan")
    return ap


def _run(args) -> int:
    out = args.out
    if args.command == "verify":
        mc = None
        if not args.no_scan:
            d = load_json(args.config) if args.config else {}
            mc_d = {"samples": 20000, "probes": 21, "resolution": 101, **d.get("mc", {})}
            if args.seed is not None:
                mc_d["seed"] = args.seed
            mc = parse_config({"mc": mc_d}).mc
        return cmd_verify(args.result, out or Path(args.result).parent, mc)
    d = load_json(args.config)
    if args.command == "solve" and isinstance(d, dict) and "types" in d:
        return cmd_solve_discrete(d, out or Path(d.get("out", ".")))
    overrides = {"method": args.method, "grid": args.grid}
    if args.seed is not None:
        overrides["mc"] = {**d.get("mc", {}), "seed": args.seed} if isinstance(d, dict) else None
    cfg = parse_config(d, overrides)
    out = out or cfg.out
    return {"solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep,
            "simulate": cmd_simulate}[args.command](cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
