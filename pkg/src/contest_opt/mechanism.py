"""Interim curves, incentive and feasibility checks, and contest rules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .distributions import (
    DistributionSpec,
    ParameterError,
    TypeGrid,
    efficient_allocation,
    make_grid,
)

__all__ = [
    "PreconditionError",
    "NonMonotoneError",
    "ShapeError",
    "ClassificationError",
    "ConstructionError",
    "Region",
    "Interval",
    "RegionPartition",
    "CoarseRanking",
    "MechanismPair",
    "ICReport",
    "FeasibilityReport",
    "canonical_utility",
    "check_ic",
    "check_interim_feasibility",
    "monotone_rearrangement",
    "classify_regions",
    "equilibrium_signal_map",
    "signal_strategy",
    "coarse_rank",
    "contest_allocate",
    "CoarseRankingRule",
    "ConstantRule",
    "PairPoolRule",
    "expost_rule_pair",
    "level_tolerance",
    "SLOPE_TOL",
    "MAX_INTERVALS",
]

SLOPE_TOL = 1e-3
MAX_INTERVALS = 64
MONOTONE_TOL = 1e-9


def level_tolerance(eta: float) -> float:
    return 1e-6 * max(1.0, eta)


class PreconditionError(ValueError):
    pass


class NonMonotoneError(PreconditionError):
    """Raised for non-monotone allocations; use ``monotone_rearrangement`` first."""


class ShapeError(ValueError):
    pass


class ClassificationError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConstructionError(RuntimeError):
    pass


class Region(str, Enum):
    NO_TENSION = "no-tension"
    NO_EFFORT = "no-effort"
    EFFICIENT = "efficient"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    tag: Region
    start: int = -1  # first grid index, -1 when not grid-based
    stop: int = -1  # one past the last grid index
    residual: float = math.nan  # Σ w (Q - Q_E) over the interval, no-effort only

    def to_record(self) -> dict:
        d = {"lo": self.lo, "hi": self.hi, "region": self.tag.value}
        if self.start >= 0:
            d.update(start=self.start, stop=self.stop)
        if not math.isnan(self.residual):
            d["residual"] = self.residual
        return d

    @classmethod
    def from_record(cls, d: dict) -> "Interval":
        return cls(float(d["lo"]), float(d["hi"]), Region(d["region"]), int(d.get("start", -1)),
                   int(d.get("stop", -1)), float(d.get("residual", math.nan)))


@dataclass(frozen=True)
class RegionPartition:
    intervals: tuple[Interval, ...]
    overflow: bool = False

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        for a, b in zip(self.intervals[:-1], self.intervals[1:]):
            if b.lo < a.hi - 1e-12 or a.hi < a.lo:
                raise ValueError("intervals must be sorted and disjoint")

    @property
    def tags(self) -> list[Region]:
        return [iv.tag for iv in self.intervals]

    def of(self, tag: Region) -> list[Interval]:
        return [iv for iv in self.intervals if iv.tag == tag]

    def measure(self, spec: DistributionSpec, tag: Region | None = None) -> float:
        return float(sum(spec.cdf(iv.hi) - spec.cdf(iv.lo) for iv in self.intervals
                         if tag is None or iv.tag == tag))

    def label(self, theta) -> np.ndarray:
        """Region value for each θ; cutoff points belong to the left interval."""
        theta = np.asarray(theta, dtype=float)
        his = np.array([iv.hi for iv in self.intervals])
        idx = np.clip(np.searchsorted(his, theta, side="left"), 0, len(his) - 1)
        names = np.array([iv.tag.value for iv in self.intervals], dtype=object)
        return names[idx]

    def to_records(self) -> list[dict]:
        return [iv.to_record() for iv in self.intervals]

    @classmethod
    def from_records(cls, records: Sequence[dict], overflow: bool = False) -> "RegionPartition":
        return cls(tuple(Interval.from_record(r) for r in records), overflow)


@dataclass(frozen=True)
class CoarseRanking:
    """Disjoint open pooling intervals in signal space; empty means strict ranking."""

    pools: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pools = sorted((float(a), float(b)) for a, b in self.pools if b > a)
        for (a0, b0), (a1, b1) in zip(pools[:-1], pools[1:]):
            if a1 < b0:
                raise ValueError("pools must be pairwise disjoint")
        object.__setattr__(self, "pools", tuple(pools))

    @property
    def lows(self) -> np.ndarray:
        return np.array([a for a, _ in self.pools], dtype=float)

    @property
    def highs(self) -> np.ndarray:
        return np.array([b for _, b in self.pools], dtype=float)

    def ceilings(self, signals) -> np.ndarray:
        s = np.asarray(signals, dtype=float)
        if not self.pools:
            return s.copy()
        lo, hi = self.lows, self.highs
        idx = np.searchsorted(lo, s, side="right") - 1
        safe = np.clip(idx, 0, lo.size - 1)
        inside = (idx >= 0) & (s > lo[safe]) & (s < hi[safe])
        return np.where(inside, hi[safe], s)

    @classmethod
    def from_partition(cls, partition: RegionPartition, spec: DistributionSpec) -> "CoarseRanking":
        pools = [(iv.lo, iv.hi) for iv in partition.of(Region.NO_EFFORT)
                 if spec.cdf(iv.hi) - spec.cdf(iv.lo) > 0]
        return cls(tuple(pools))


@dataclass(frozen=True)
class MechanismPair:
    grid: TypeGrid
    Q: np.ndarray
    U: np.ndarray
    eta: float
    n: int
    k: int
    alpha: float = 0.5

    def __post_init__(self):
        for name in ("Q", "U"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != self.grid.points.shape:
                raise ShapeError(f"{name} has shape {arr.shape}, grid has {self.grid.points.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.eta > 0:
            raise ParameterError("eta must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError("alpha must lie in [0, 1]")
        if not 0 < self.k < self.n:
            raise ParameterError(f"need 0 < k < n, got n={self.n}, k={self.k}")

    @property
    def spec(self) -> DistributionSpec:
        return self.grid.spec

    @property
    def theta(self) -> np.ndarray:
        return self.grid.points

    @property
    def QE(self) -> np.ndarray:
        return efficient_allocation(self.spec, self.n, self.k, self.grid.points)

    def efficiency(self) -> float:
        """Per-agent matching efficiency E[θ Q(θ)]."""
        return self.grid.expect(self.grid.points * self.Q)

    def mean_utility(self) -> float:
        return self.grid.expect(self.U)

    def replace(self, **changes) -> "MechanismPair":
        d = dict(grid=self.grid, Q=self.Q, U=self.U, eta=self.eta, n=self.n, k=self.k, alpha=self.alpha)
        d.update(changes)
        return MechanismPair(**d)

    def to_records(self) -> list[dict]:
        qe = self.QE
        return [{"theta": float(t), "Q": float(q), "U": float(u), "Q_E": float(e)}
                for t, q, u, e in zip(self.grid.points, self.Q, self.U, qe)]

    @classmethod
    def from_records(cls, records, spec: DistributionSpec, eta: float, n: int, k: int,
                     alpha: float = 0.5) -> "MechanismPair":
        theta = np.array([r["theta"] for r in records], dtype=float)
        grid = make_grid(spec, len(theta) - 1)
        if not np.allclose(grid.points, theta, atol=1e-12, rtol=0):
            raise ShapeError("records are not on the uniform grid of the distribution")
        return cls(grid, [r["Q"] for r in records], [r["U"] for r in records], eta, n, k, alpha)


def _as_theta(grid_or_theta) -> np.ndarray:
    if isinstance(grid_or_theta, TypeGrid):
        return grid_or_theta.points
    return np.asarray(grid_or_theta, dtype=float)


def canonical_utility(Q, grid, eta: float, u_low: float | None = None) -> np.ndarray:
    """Highest utility curve compatible with contest incentives for ``Q``.

    Û(θ) = min(u̲ + η(θ-θ̲), min_{θ'≤θ} Q(θ') + η(θ-θ')), computed by one sweep.
    ``grid`` may be a TypeGrid or an array of type values.
    """
    Q = np.asarray(Q, dtype=float)
    theta = _as_theta(grid)
    if Q.shape != theta.shape:
        raise ShapeError("Q and grid differ in shape")
    if np.any(np.diff(Q) < -MONOTONE_TOL):
        raise NonMonotoneError("canonical utility needs a non-decreasing allocation")
    if u_low is None:
        u_low = float(Q[0])
    if u_low > Q[0] + 1e-12:
        raise PreconditionError("lowest-type utility exceeds its allocation")
    return kernels.canonical_sweep(np.ascontiguousarray(theta), np.ascontiguousarray(Q), float(eta), float(u_low))


@dataclass(frozen=True)
class ICReport:
    passed: bool
    worst: dict
    where: dict

    def __bool__(self):
        return self.passed


def check_ic(pair: MechanismPair, tol: float | None = None, slope_tol: float = SLOPE_TOL) -> ICReport:
    """Contest incentive conditions on the grid.

    (1) slopes of U in [-slope_tol, η + slope_tol]; (2) U ≤ Q + tol;
    (3) slope of U reaches η - slope_tol wherever U < Q - tol.  Condition (3)
    uses the slope into the cell from the left: a utility sitting strictly
    below the allocation must have been pushed up there at rate η.
    """
    if pair.Q.shape != pair.U.shape or pair.Q.shape != pair.grid.points.shape:
        raise ShapeError("mismatched grids")
    tol = level_tolerance(pair.eta) if tol is None else tol
    theta, Q, U, eta = pair.grid.points, pair.Q, pair.U, pair.eta
    slope = np.diff(U) / np.diff(theta)
    worst, where = {}, {}
    lowv = -slope
    highv = slope - eta
    j = int(np.argmax(np.maximum(lowv, highv))) if slope.size else 0
    worst["slope"] = float(max(lowv.max(initial=-np.inf), highv.max(initial=-np.inf)))
    where["slope"] = float(theta[j])
    gap = U - Q
    worst["level"] = float(gap.max())
    where["level"] = float(theta[int(np.argmax(gap))])
    below = (Q - U > tol)[1:]
    short = np.where(below, eta - slope, -np.inf)
    worst["effort"] = float(short.max(initial=-np.inf))
    where["effort"] = float(theta[1 + int(np.argmax(short))]) if short.size else float(theta[0])
    passed = worst["slope"] <= slope_tol and worst["level"] <= tol and worst["effort"] <= slope_tol
    return ICReport(bool(passed), worst, where)


@dataclass(frozen=True)
class FeasibilityReport:
    passed: bool
    worst_slack: float
    where: float
    slack: np.ndarray = field(repr=False)

    def __bool__(self):
        return self.passed


def check_interim_feasibility(Q, grid, n: int, k: int, tol: float = 1e-6) -> FeasibilityReport:
    """Tail-sum majorization of Q by the efficient allocation on the grid.

    ``grid`` is a TypeGrid, or a DistributionSpec (the uniform grid with
    ``len(Q) - 1`` cells is then used).
    """
    Q = np.asarray(Q, dtype=float)
    if isinstance(grid, DistributionSpec):
        grid = make_grid(grid, Q.size - 1)
    if Q.shape != grid.points.shape:
        raise ShapeError("Q and grid differ in shape")
    if np.any(np.diff(Q) < -MONOTONE_TOL):
        raise NonMonotoneError("feasibility test needs a non-decreasing allocation; apply monotone_rearrangement")
    slack = grid.tail_sums(Q) - grid.tail_sums(grid.efficient_allocation(n, k))
    j = int(np.argmax(slack))
    return FeasibilityReport(bool(slack[j] <= tol), float(slack[j]), float(grid.points[j]), slack)


def monotone_rearrangement(Q, grid) -> np.ndarray:
    """Non-decreasing rearrangement Q†(θ) = G⁻¹(F(θ)) of Q on the grid.

    Each grid point receives the average of G⁻¹ over its own probability
    cell, which keeps E[Q] exact and can only raise E[θ Q].
    """
    Q = np.asarray(Q, dtype=float)
    if isinstance(grid, DistributionSpec):
        grid = make_grid(grid, Q.size - 1)
    w = grid.weights
    order = np.argsort(Q, kind="stable")
    cum_mass = np.concatenate(([0.0], np.cumsum(w[order])))
    cum_value = np.concatenate(([0.0], np.cumsum((w * Q)[order])))
    edges = np.concatenate(([0.0], np.cumsum(w)))
    edges[-1] = cum_mass[-1]
    H = np.interp(edges, cum_mass, cum_value)
    vals = Q[order]
    last = Q.size - 1
    i_lo = np.clip(np.searchsorted(cum_mass, edges[:-1], side="right") - 1, 0, last)
    i_hi = np.clip(np.searchsorted(cum_mass, edges[1:], side="left") - 1, 0, last)
    i_hi = np.maximum(i_hi, i_lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = np.where(w > 0, np.diff(H) / w, vals[i_lo])
    # clipping to the spanned sorted values removes roundoff on flat pieces
    out = np.clip(avg, vals[i_lo], vals[i_hi])
    return np.maximum.accumulate(out)


def classify_regions(pair: MechanismPair, tol: float | None = None, slope_tol: float = SLOPE_TOL,
                     max_transition: int = 2) -> RegionPartition:
    """Split the grid into no-tension, no-effort and efficient intervals.

    A cell may satisfy several tags (for instance where Q_E rises at exactly
    rate η); the tag of the previous cell wins when it still applies.  Runs of
    at most ``max_transition`` cells matching no tag are transition cells
    between two regions and join the interval on their left.
    """
    tol = level_tolerance(pair.eta) if tol is None else tol
    theta, Q, U, eta = pair.grid.points, pair.Q, pair.U, pair.eta
    QE = pair.QE
    N = theta.size
    fwd = np.diff(U) / np.diff(theta)
    fwd = np.append(fwd, fwd[-1])
    bwd = np.insert(fwd[:-1], 0, fwd[0])
    on_qe = np.abs(Q - QE) <= tol
    on_q = np.abs(U - Q) <= tol
    cands = {
        Region.NO_TENSION: on_qe & on_q & (fwd <= eta + slope_tol),
        Region.EFFICIENT: on_qe & (U < Q - tol) & (np.abs(bwd - eta) <= slope_tol),
        Region.NO_EFFORT: on_q & (np.abs(fwd - eta) <= slope_tol),
    }
    labels: list[Region | None] = [None] * N
    prev = None
    for j in range(N):
        ok = [tag for tag in cands if cands[tag][j]]
        if prev in ok:
            labels[j] = prev
        elif ok:
            labels[j] = ok[0]
        prev = labels[j]

    # absorb short unmatched runs
    j = 0
    while j < N:
        if labels[j] is not None:
            j += 1
            continue
        end = j
        while end < N and labels[end] is None:
            end += 1
        if end - j > max_transition or (j == 0 and end == N):
            raise ClassificationError(
                f"{end - j} consecutive grid cells match no region near theta={theta[j]:.6g}",
                {"start": j, "stop": end, "theta": theta[j:end].tolist(), "Q": Q[j:end].tolist(),
                 "U": U[j:end].tolist(), "Q_E": QE[j:end].tolist()},
            )
        fill = labels[j - 1] if j > 0 else labels[end]
        for i in range(j, end):
            labels[i] = fill
        j = end

    runs = []
    start = 0
    for j in range(1, N + 1):
        if j == N or labels[j] != labels[start]:
            runs.append((start, j, labels[start]))
            start = j
    w = pair.grid.weights
    intervals = []
    for i, (a, b, tag) in enumerate(runs):
        lo = theta[0] if i == 0 else 0.5 * (theta[a - 1] + theta[a])
        hi = theta[-1] if i == len(runs) - 1 else 0.5 * (theta[b - 1] + theta[b])
        res = float(np.dot(w[a:b], Q[a:b] - QE[a:b])) if tag == Region.NO_EFFORT else math.nan
        intervals.append(Interval(float(lo), float(hi), tag, a, b, res))
    overflow = len(intervals) > MAX_INTERVALS
    if overflow:
        warnings.warn(f"{len(intervals)} region intervals detected; keeping the first {MAX_INTERVALS}",
                      RuntimeWarning)
        intervals = intervals[:MAX_INTERVALS]
    return RegionPartition(tuple(intervals), overflow)


def equilibrium_signal_map(pair: MechanismPair, tol: float | None = None) -> np.ndarray:
    """Recommended signal ŝ(θ) = θ + (Q - U)/η; requires the pair to pass check_ic."""
    report = check_ic(pair, tol)
    if not report.passed:
        raise PreconditionError(f"pair violates contest incentives: {report.worst}")
    return pair.grid.points + (pair.Q - pair.U) / pair.eta


def signal_strategy(pair: MechanismPair, regions: RegionPartition | None = None) -> Callable:
    """Equilibrium strategy θ ↦ ŝ(θ) usable off the grid.

    With a region partition the allocation is evaluated exactly where it
    equals Q_E, so the jump at the top of a pool is not smeared across a cell.
    """
    theta = pair.grid.points
    s_grid = equilibrium_signal_map(pair)
    U = pair.U
    if regions is None:
        return lambda t: np.interp(t, theta, s_grid)
    spec, n, k, eta = pair.spec, pair.n, pair.k, pair.eta

    def strategy(t):
        t = np.asarray(t, dtype=float)
        u = np.interp(t, theta, U)
        lab = regions.label(t)
        q = np.where(lab == Region.NO_EFFORT.value, u, efficient_allocation(spec, n, k, t))
        return t + np.maximum(q - u, 0.0) / eta

    return strategy


def coarse_rank(ranking: CoarseRanking, signals):
    """Per-agent (r, z): opponents strictly above the ceiling, and ties at the ceiling."""
    s = np.asarray(signals, dtype=float)
    c = ranking.ceilings(s)
    r = np.sum(s[..., None, :] > c[..., :, None], axis=-1)
    z = np.sum(c[..., None, :] == c[..., :, None], axis=-1)
    return r, z


def contest_allocate(ranking: CoarseRanking, signals, k: float) -> np.ndarray:
    if k < 1:
        raise ParameterError("k must be at least 1")
    s = np.asarray(signals, dtype=float)
    flat = np.ascontiguousarray(s.reshape(-1, s.shape[-1]))
    out = kernels.coarse_allocate(flat, np.ascontiguousarray(ranking.lows),
                                  np.ascontiguousarray(ranking.highs), float(k))
    return out.reshape(s.shape)


class CoarseRankingRule:
    """Ex-post rule: coarse-ranking contest with ``k`` items."""

    def __init__(self, ranking: CoarseRanking | None = None, k: int = 1):
        self.ranking = ranking or CoarseRanking()
        self.k = k

    def allocate(self, signals) -> np.ndarray:
        return contest_allocate(self.ranking, signals, self.k)


class ConstantRule:
    """Allocation independent of signals."""

    def __init__(self, value: float):
        self.value = float(value)

    def allocate(self, signals) -> np.ndarray:
        return np.full(np.shape(signals), self.value)


@dataclass(frozen=True)
class _Pool:
    a: float
    b: float
    top: float  # signals in [a, top) play inside the pool; [b, top) map to b
    Fa: float
    m: float
    u: np.ndarray
    r: np.ndarray


class PairPoolRule:
    """Two-agent rule that reproduces a pooled interim allocation.

    Outside pools the higher signal wins.  When both signals sit in the same
    pool, with pool coordinates u_hi > u_lo (u = F(θ) - F(a)), the higher
    signal wins with probability (1 + r(u_lo))/2, where
    r(u) = 2 ∫_u^m (h(v) - h(u)) dv / (m - u)² and h(u) = Q(θ(u)) - F(a).
    Averaging over the opponent gives back h up to a constant.
    """

    def __init__(self, spec: DistributionSpec, pools: Sequence[_Pool] = ()):
        self.spec = spec
        self.pools = tuple(sorted(pools, key=lambda p: p.a))

    def encode(self, signals):
        """Pool index (-1 outside), pool coordinate and tilt for each signal."""
        s = np.asarray(signals, dtype=float)
        idx = np.full(s.shape, -1, dtype=np.int64)
        u = np.zeros(s.shape)
        r = np.zeros(s.shape)
        for i, p in enumerate(self.pools):
            top_closed = p.top <= p.b
            inside = (s >= p.a) & ((s <= p.b) if top_closed else (s < p.top))
            if not inside.any():
                continue
            tau = np.minimum(s[inside], p.b)
            ui = np.clip(np.asarray(self.spec.cdf(tau)) - p.Fa, 0.0, p.m)
            idx[inside] = i
            u[inside] = ui
            r[inside] = np.interp(ui, p.u, p.r)
        return idx, u, r

    def win_probability(self, s, s_opp) -> np.ndarray:
        s, s_opp = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(s_opp, dtype=float))
        p1, u1, r1 = self.encode(s)
        p2, u2, r2 = self.encode(s_opp)
        raw = np.where(s > s_opp, 1.0, np.where(s < s_opp, 0.0, 0.5))
        pooled = np.where(u1 > u2, 0.5 + 0.5 * r2, np.where(u1 < u2, 0.5 - 0.5 * r1, 0.5))
        return np.where((p1 >= 0) & (p1 == p2), pooled, raw)

    def allocate(self, signals) -> np.ndarray:
        s = np.asarray(signals, dtype=float)
        if s.shape[-1] != 2:
            raise ShapeError("the pooled pair rule allocates between exactly two agents")
        x1 = self.win_probability(s[..., 0], s[..., 1])
        return np.stack([x1, 1.0 - x1], axis=-1)


def expost_rule_pair(pair: MechanismPair, regions: RegionPartition | None = None,
                     resolution: int = 4001, tol: float = 1e-3) -> PairPoolRule:
    """Ex-post rule for two agents and one item whose interim allocation is Q."""
    if pair.n != 2 or pair.k != 1:
        raise PreconditionError("the ex-post construction covers n=2, k=1 only")
    spec, theta, Q = pair.spec, pair.grid.points, pair.Q
    if regions is None:
        regions = classify_regions(pair)
    pools = []
    for iv in regions.of(Region.NO_EFFORT):
        a, b = iv.lo, iv.hi
        Fa = float(spec.cdf(a))
        m = float(spec.cdf(b)) - Fa
        if m <= 0:
            continue
        inside = (theta >= a) & (theta <= b)
        tq, qq = theta[inside], Q[inside]
        if tq.size < 2:
            continue
        if qq[-1] - qq[0] > m + tol:
            raise ConstructionError(f"pool [{a:.6g}, {b:.6g}] rises faster than its probability mass")
        slope_lo = (qq[1] - qq[0]) / (tq[1] - tq[0])
        slope_hi = (qq[-1] - qq[-2]) / (tq[-1] - tq[-2])

        def qfun(t, tq=tq, qq=qq, slo=slope_lo, shi=slope_hi):
            out = np.interp(t, tq, qq)
            out = np.where(t < tq[0], qq[0] + slo * (t - tq[0]), out)
            return np.where(t > tq[-1], qq[-1] + shi * (t - tq[-1]), out)

        u = np.linspace(0.0, m, resolution)
        h = qfun(np.asarray(spec.quantile(np.clip(Fa + u, 0.0, 1.0)))) - Fa
        seg = 0.5 * (h[1:] + h[:-1]) * np.diff(u)
        tail = np.concatenate((np.cumsum(seg[::-1])[::-1], [0.0]))
        span = m - u
        with np.errstate(divide="ignore", invalid="ignore"):
            r = 2.0 * (tail - span * h) / span**2
        r[-1] = r[-2]
        if r.max() > 1.0 + tol or r.min() < -tol:
            raise ConstructionError(
                f"pool [{a:.6g}, {b:.6g}] admits no tilt in [0, 1] (range {r.min():.4g}..{r.max():.4g})")
        r = np.clip(r, 0.0, 1.0)
        # lowest signal recommended to types just above the pool
        top = b
        nxt = [v for v in regions.intervals if v.lo >= b - 1e-12 and v is not iv]
        if b >= spec.hi - 1e-12:
            # no type above the pool: higher signals must not buy the item outright
            top = math.inf
        elif nxt and nxt[0].tag == Region.EFFICIENT:
            qe_b = efficient_allocation(spec, 2, 1, b)
            top = b + max(0.0, qe_b - float(qfun(b))) / pair.eta
        pools.append(_Pool(float(a), float(b), float(top), Fa, m, u, r))
    return PairPoolRule(spec, pools)
