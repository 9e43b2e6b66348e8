"""Optimal contests: the discretized LP, the closed form for convex Q_E, sweeps."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import optimize

from .distributions import (
    DistributionSpec,
    ParameterError,
    TypeGrid,
    efficient_allocation,
    efficient_allocation_slope,
    efficient_tail_integral,
    make_grid,
)
from .lp import LPError, interior_point
from .mechanism import (
    Interval,
    MechanismPair,
    PreconditionError,
    Region,
    RegionPartition,
    MONOTONE_TOL,
    ClassificationError,
    canonical_utility,
    check_interim_feasibility,
    classify_regions,
    level_tolerance,
)

__all__ = [
    "SolveConfig",
    "SolveResult",
    "ParetoPoint",
    "objective_value",
    "solve_lp",
    "solve_convex_closed_form",
    "solve",
    "pareto_sweep",
    "frontier_slopes",
    "replicate_economy",
    "cutoff_type",
    "efficient_is_convex",
]

METHODS = ("lp", "closed-form", "auto")


@dataclass(frozen=True)
class SolveConfig:
    spec: DistributionSpec
    n: int = 2
    k: int = 1
    eta: float = 1.0
    alpha: float = 0.5
    M: int = 2000
    lp_tol: float = 1e-9
    method: str = "auto"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError("alpha: must lie in [0, 1]")
        if not self.eta > 0 or not math.isfinite(self.eta):
            raise ParameterError("eta: must be positive and finite")
        if int(self.M) != self.M or self.M < 100:
            raise ParameterError("grid: need at least 100 cells")
        if int(self.n) != self.n or int(self.k) != self.k or not 0 < self.k < self.n:
            raise ParameterError(f"n, k: need integers with 0 < k < n, got n={self.n}, k={self.k}")
        if self.method not in METHODS:
            raise ParameterError(f"method: expected one of {METHODS}, got {self.method!r}")

    def replace(self, **changes) -> "SolveConfig":
        return dataclasses.replace(self, **changes)

    def grid(self) -> TypeGrid:
        return make_grid(self.spec, self.M)


@dataclass
class SolveResult:
    pair: MechanismPair
    objective: float
    regions: RegionPartition
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def no_tension_measure(self) -> float:
        return self.regions.measure(self.pair.spec, Region.NO_TENSION)

    def to_dict(self) -> dict:
        p = self.pair
        return {
            "method": self.method,
            "objective": self.objective,
            "distribution": p.spec.to_dict(),
            "n": p.n, "k": p.k, "eta": p.eta, "alpha": p.alpha, "grid": p.grid.size - 1,
            "curves": p.to_records(),
            "regions": self.regions.to_records(),
            "regions_overflow": self.regions.overflow,
            "diagnostics": _jsonable(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveResult":
        spec = DistributionSpec.from_dict(d["distribution"])
        pair = MechanismPair.from_records(d["curves"], spec, float(d["eta"]), int(d["n"]), int(d["k"]),
                                          float(d["alpha"]))
        regions = RegionPartition.from_records(d["regions"], bool(d.get("regions_overflow", False)))
        return cls(pair, float(d["objective"]), regions, d.get("method", "lp"), d.get("diagnostics", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def objective_value(pair: MechanismPair, alpha: float | None = None) -> float:
    """Per-agent E[α θ Q + (1-α) U]; total welfare is n times this."""
    a = pair.alpha if alpha is None else alpha
    g = pair.grid
    return float(np.dot(g.weights, a * g.points * pair.Q + (1.0 - a) * pair.U))


def efficient_is_convex(spec: DistributionSpec, n: int, k: int, M: int = 2000) -> bool:
    q = efficient_allocation(spec, n, k, np.linspace(spec.lo, spec.hi, M + 1))
    return bool(np.min(np.diff(q, 2)) >= -1e-8)


# ---------------------------------------------------------------------------
# Linear program
# ---------------------------------------------------------------------------

# per grid point: Q, U, T (tail sum), sT, sUQ, and for j < M: dQ, dU, eU
_NV = 8
_NR = 6


def _build_lp(grid: TypeGrid, qe: np.ndarray, eta: float, alpha: float):
    """Standard-form data with rows and columns interleaved by grid index."""
    N = grid.size
    M = N - 1
    w = grid.weights
    bound = grid.tail_sums(qe)
    dtheta = np.diff(grid.points)
    nvar = _NV * M + 5
    nrow = _NR * M + 3
    j = np.arange(N)
    jm = np.arange(M)
    col = lambda idx, off: _NV * idx + off  # noqa: E731
    row = lambda idx, off: _NR * idx + off  # noqa: E731
    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(np.asarray(r))
        cols.append(np.asarray(c))
        vals.append(np.broadcast_to(np.asarray(v, dtype=float), np.shape(r)))

    b = np.zeros(nrow)
    # tail definition: T_j - T_{j+1} - w_j Q_j = 0
    put(row(j, 0), col(j, 2), 1.0)
    put(row(jm, 0), col(jm + 1, 2), -1.0)
    put(row(j, 0), col(j, 0), -w)
    # tail bound: T_j + sT_j = B_j
    put(row(j, 1), col(j, 2), 1.0)
    put(row(j, 1), col(j, 3), 1.0)
    b[row(j, 1)] = bound
    # U ≤ Q: Q_j - U_j - sUQ_j = 0
    put(row(j, 2), col(j, 0), 1.0)
    put(row(j, 2), col(j, 1), -1.0)
    put(row(j, 2), col(j, 4), -1.0)
    # monotone Q: Q_{j+1} - Q_j - dQ_j = 0
    put(row(jm, 3), col(jm + 1, 0), 1.0)
    put(row(jm, 3), col(jm, 0), -1.0)
    put(row(jm, 3), col(jm, 5), -1.0)
    # utility increments: U_{j+1} - U_j - dU_j = 0 and dU_j + eU_j = η Δθ_j
    put(row(jm, 4), col(jm + 1, 1), 1.0)
    put(row(jm, 4), col(jm, 1), -1.0)
    put(row(jm, 4), col(jm, 6), -1.0)
    put(row(jm, 5), col(jm, 6), 1.0)
    put(row(jm, 5), col(jm, 7), 1.0)
    b[row(jm, 5)] = eta * dtheta
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nrow, nvar))
    c = np.zeros(nvar)
    c[col(j, 0)] = -alpha * w * grid.points
    c[col(j, 1)] = -(1.0 - alpha) * w
    return c, A, b, col(j, 0), col(j, 1)


def _snap_lower_tail(pair: MechanismPair, loss_tol: float) -> tuple[MechanismPair, int]:
    """Replace a near-indifferent pool at the bottom of the support by Q_E.

    Where the density is close to zero the LP objective cannot tell a small
    pool of free allocation from the efficient rule, so an interior-point
    solution lands somewhere in between.  Among the prefixes on which U = Q,
    take the longest one whose replacement by Q_E keeps the rule monotone and
    feasible and costs at most ``loss_tol`` of objective.
    """
    Q, U, qe = pair.Q, pair.U, pair.QE
    tight = np.abs(Q - U) <= level_tolerance(pair.eta)
    off = np.abs(Q - qe) > level_tolerance(pair.eta)
    run = int(np.argmin(tight)) if not tight.all() else tight.size
    if run == 0 or not off[:run].any():
        return pair, 0
    base = objective_value(pair)
    last = int(np.nonzero(off[:run])[0][-1]) + 1
    for j in range(last, 0, -1):
        if j < Q.size and qe[j - 1] > Q[j] + MONOTONE_TOL:
            continue
        Qs = np.concatenate([qe[:j], Q[j:]])
        if np.any(np.diff(Qs) < -MONOTONE_TOL):
            continue
        Qs = np.maximum.accumulate(Qs)
        cand = pair.replace(Q=Qs, U=canonical_utility(Qs, pair.grid, pair.eta, Qs[0]))
        if base - objective_value(cand) > loss_tol:
            continue
        if not check_interim_feasibility(Qs, pair.grid, pair.n, pair.k).passed:
            continue
        return cand, j
    return pair, 0


def solve_lp(config: SolveConfig) -> SolveResult:
    """Maximize the discretized objective subject to feasibility and incentives."""
    grid = config.grid()
    qe = grid.efficient_allocation(config.n, config.k)
    alpha = config.alpha
    lp_alpha = min(alpha, 1.0 - 1e-9)
    c, A, b, iq, iu = _build_lp(grid, qe, config.eta, lp_alpha)
    scale = float(np.max(np.abs(c)))
    res = interior_point(c / scale, A, b, tol=config.lp_tol)
    if not res.converged and max(res.primal_residual, res.dual_residual, res.gap) > 1e-6:
        raise LPError(f"interior point did not converge after {res.iterations} iterations")
    Q = np.clip(np.maximum.accumulate(res.x[iq]), 0.0, 1.0)
    U = canonical_utility(Q, grid, config.eta, Q[0])
    pair = MechanismPair(grid, Q, U, config.eta, config.n, config.k, alpha)
    pair, snapped = _snap_lower_tail(pair, 10.0 * config.lp_tol * max(1.0, abs(objective_value(pair))))
    note = None
    try:
        regions = classify_regions(pair)
    except ClassificationError as exc:
        # with no weight on efficiency the maximizer is far from unique and
        # the region structure is not defined
        if alpha > 0.0:
            raise
        regions, note = RegionPartition(()), str(exc)
    diag = {
        "iterations": res.iterations,
        "primal_residual": res.primal_residual,
        "dual_residual": res.dual_residual,
        "duality_gap": res.gap,
        "lp_objective": -res.objective * scale,
        "max_utility_polish": float(np.max(np.abs(U - res.x[iu]))),
        "snapped_cells": snapped,
        "unclassified": note,
        "binding_residuals": [iv.residual for iv in regions.of(Region.NO_EFFORT)],
        "cutoffs": [iv.hi for iv in regions.intervals[:-1]],
    }
    return SolveResult(pair, objective_value(pair), regions, "lp", diag)


# ---------------------------------------------------------------------------
# Closed form for convex Q_E and one item
# ---------------------------------------------------------------------------


class _ConvexProblem:
    def __init__(self, config: SolveConfig):
        self.spec = config.spec
        self.n = config.n
        self.eta = config.eta
        self.alpha = config.alpha
        spec = self.spec
        self.lo, self.hi = spec.lo, spec.hi
        self.qe = lambda t: efficient_allocation(spec, self.n, 1, t)
        self.tail = lambda t: efficient_tail_integral(spec, self.n, 1, t)
        slope = lambda t: efficient_allocation_slope(spec, self.n, 1, t)  # noqa: E731
        eta = self.eta
        if slope(self.hi) <= eta * (1.0 + 1e-9):
            self.theta_star = self.hi
        elif slope(self.lo) >= eta:
            self.theta_star = self.lo
        else:
            self.theta_star = optimize.brentq(lambda t: slope(t) - eta, self.lo, self.hi, xtol=1e-14)

    def line(self, t1, t):
        return self.qe(t1) + self.eta * (np.asarray(t) - t1)

    def residual(self, t1, t2) -> float:
        """∫_{t1}^{t2} (line - Q_E) dF."""
        spec = self.spec
        base = self.qe(t1) - self.eta * t1
        return (base * (spec.cdf(t2) - spec.cdf(t1)) + self.eta * spec.partial_mean(t1, t2)
                - (self.tail(t1) - self.tail(t2)))

    def upper_cutoff(self, t1):
        """Root of the binding integral, or None when the line cannot bind."""
        if t1 >= self.theta_star:
            return t1
        if self.line(t1, self.hi) >= 1.0:
            return None
        gap = lambda t: float(self.line(t1, t) - self.qe(t))  # noqa: E731
        cross = optimize.brentq(gap, self.theta_star, self.hi, xtol=1e-14)
        if self.residual(t1, self.hi) > 0:
            return None
        if self.residual(t1, cross) <= 0:
            return cross
        return optimize.brentq(lambda t: self.residual(t1, t), cross, self.hi, xtol=1e-13, rtol=1e-15)

    def objective(self, t1, t2) -> float:
        spec, a, eta = self.spec, self.alpha, self.eta
        q1 = self.qe(t1)
        base = q1 - eta * t1
        th_qe = lambda t: t * self.qe(t)  # noqa: E731
        eff = (spec.expect_between(th_qe, self.lo, t1) + spec.expect_between(th_qe, t2, self.hi)
               + base * spec.partial_mean(t1, t2) + eta * spec.expect_between(lambda t: t * t, t1, t2))
        util = (self.tail(self.lo) - self.tail(t1) + base * (1.0 - spec.cdf(t1))
                + eta * spec.partial_mean(t1, self.hi))
        return a * eff + (1.0 - a) * util

    def value(self, t1) -> float:
        t2 = self.upper_cutoff(t1)
        return -math.inf if t2 is None else self.objective(t1, t2)


def _discretize_convex(prob: _ConvexProblem, grid: TypeGrid, t1: float, t2: float):
    theta = grid.points
    qe = grid.efficient_allocation(prob.n, 1)
    Q = qe.copy()
    mid = (theta > t1) & (theta <= t2)
    Q[mid] = prob.line(t1, theta[mid])
    # Cells straddling t2 can leave a positive discrete tail sum over the pool;
    # absorb it just above the pool so the grid curve stays feasible.
    excess = float(np.dot(grid.weights[mid], Q[mid] - qe[mid])) if mid.any() else 0.0
    idx = int(np.argmax(theta > t2)) if np.any(theta > t2) else theta.size
    while excess > 0 and idx < theta.size:
        room = Q[idx] - Q[idx - 1]
        cut = min(excess / grid.weights[idx], room)
        Q[idx] -= cut
        excess -= cut * grid.weights[idx]
        idx += 1
    return Q, mid


def solve_convex_closed_form(config: SolveConfig, scan: int = 200) -> SolveResult:
    """Three-region optimum for one item when Q_E is convex."""
    if config.k != 1:
        raise PreconditionError("closed form covers k=1 only")
    if not efficient_is_convex(config.spec, config.n, config.k, config.M):
        raise PreconditionError("Q_E is not convex on the grid; use the LP")
    prob = _ConvexProblem(config)
    lo, ts = prob.lo, prob.theta_star
    if ts <= lo or ts >= prob.hi:
        t1 = t2 = ts
        best = prob.objective(t1, t2)
        feasible_from = ts
    else:
        cands = np.linspace(lo, ts, scan)
        vals = np.array([prob.value(t) for t in cands])
        ok = np.isfinite(vals)
        feasible_from = float(cands[np.argmax(ok)])
        i = int(np.argmax(np.where(ok, vals, -np.inf)))
        a = cands[max(i - 1, 0)]
        b = cands[min(i + 1, scan - 1)]
        edge = None
        if not ok[max(i - 1, 0)]:
            # bisect for the edge of the feasible range before refining
            bad, good = a, cands[i]
            while good - bad > 1e-10:
                m = 0.5 * (bad + good)
                if prob.upper_cutoff(m) is None:
                    bad = m
                else:
                    good = m
            a = edge = float(good)
        res = optimize.minimize_scalar(lambda t: -prob.value(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-6})
        t1 = float(res.x) if np.isfinite(res.fun) and -res.fun >= vals[i] else float(cands[i])
        if edge is not None and prob.value(edge) >= prob.value(t1):
            # corner optimum: the pool reaches the top of the support
            t1 = edge
        t2 = prob.upper_cutoff(t1)
        if prob.hi - t2 < 1e-8 * (prob.hi - prob.lo):
            t2 = prob.hi
        best = prob.objective(t1, t2)
    grid = config.grid()
    Q, mid = _discretize_convex(prob, grid, t1, t2)
    U = canonical_utility(Q, grid, config.eta, Q[0])
    pair = MechanismPair(grid, Q, U, config.eta, config.n, 1, config.alpha)
    theta = grid.points
    n_lo = int(np.sum(theta <= t1))
    n_mid = int(np.sum(mid))
    intervals = []
    if t1 > lo:
        intervals.append(Interval(lo, t1, Region.NO_TENSION, 0, n_lo))
    if t2 > t1:
        intervals.append(Interval(t1, t2, Region.NO_EFFORT, n_lo, n_lo + n_mid, prob.residual(t1, t2)))
    if t2 < prob.hi:
        intervals.append(Interval(t2, prob.hi, Region.EFFICIENT, n_lo + n_mid, theta.size))
    regions = RegionPartition(tuple(intervals))
    diag = {
        "theta1": t1, "theta2": t2, "theta_star": ts,
        "feasible_from": feasible_from,
        "binding_residuals": [prob.residual(t1, t2)] if t2 > t1 else [],
        "continuous_objective": best,
        "cutoffs": [iv.hi for iv in intervals[:-1]],
    }
    return SolveResult(pair, objective_value(pair), regions, "closed-form", diag)


def solve(config: SolveConfig) -> SolveResult:
    method = config.method
    if method == "auto":
        method = "closed-form" if config.k == 1 and efficient_is_convex(config.spec, config.n, 1, config.M) else "lp"
    if method == "closed-form":
        return solve_convex_closed_form(config)
    return solve_lp(config)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParetoPoint:
    efficiency: float
    utility: float
    alpha: float


def pareto_sweep(config: SolveConfig, alphas) -> list[ParetoPoint]:
    alphas = list(alphas)
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise ParameterError("alpha grid must be non-empty and inside (0, 1)")
    pts = []
    for a in alphas:
        res = solve(config.replace(alpha=a))
        pts.append(ParetoPoint(res.pair.efficiency(), res.pair.mean_utility(), a))
    return sorted(pts, key=lambda p: (p.utility, -p.efficiency))


def frontier_slopes(points, merge_tol: float = 1e-7) -> np.ndarray:
    """Slopes dE[θQ]/dE[U] between consecutive distinct frontier points."""
    pts = sorted(points, key=lambda p: p.utility)
    keep = [pts[0]]
    for p in pts[1:]:
        if p.utility - keep[-1].utility > merge_tol:
            keep.append(p)
    u = np.array([p.utility for p in keep])
    e = np.array([p.efficiency for p in keep])
    return np.diff(e) / np.diff(u)


def replicate_economy(config: SolveConfig, z: int) -> SolveConfig:
    if int(z) != z or z < 1:
        raise ParameterError("scale z must be a positive integer")
    return config.replace(n=config.n * int(z), k=config.k * int(z))


def cutoff_type(spec: DistributionSpec, n: int, k: int) -> float:
    """θ_c with Pr[θ ≥ θ_c] = k/n."""
    return float(spec.quantile(1.0 - k / n))
