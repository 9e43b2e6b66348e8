"""Monte Carlo checks of ex-post rules: interim estimates and deviation scans.

Every probe type gets its own random stream, seeded from the master seed and
the probe's row index, so results do not depend on how rows are spread over
worker threads.  Within a row all candidate signals face the same opponent
draws, which keeps the variance of payoff differences small.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .distributions import DistributionSpec, ParameterError, TypeGrid
from .mechanism import PairPoolRule

__all__ = [
    "McConfig",
    "InterimEstimate",
    "DeviationReport",
    "probe_types",
    "mc_interim_estimate",
    "deviation_scan",
    "simulate_vcg",
]


@dataclass(frozen=True)
class McConfig:
    samples: int = 100_000
    seed: int = 0
    resolution: int = 201
    probes: int = 33
    workers: int = 1

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1000:
            raise ParameterError("samples: need at least 1000 draws per probe")
        if int(self.resolution) != self.resolution or self.resolution < 2:
            raise ParameterError("resolution: need at least 2 deviation signals")
        if int(self.probes) != self.probes or self.probes < 1:
            raise ParameterError("probes: need at least one probe type")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError("seed: must be a non-negative integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ParameterError("workers: must be a positive integer")

    def rng(self, row: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(row)])


@dataclass
class InterimEstimate:
    theta: np.ndarray
    Q_hat: np.ndarray
    Q_se: np.ndarray
    U_hat: np.ndarray
    U_se: np.ndarray
    samples: int

    def within(self, Q, z: float = 3.0, floor: float = 0.0) -> np.ndarray:
        """Probe-wise test |Q̂ - Q| ≤ z·SE + floor."""
        return np.abs(self.Q_hat - np.asarray(Q)) <= z * self.Q_se + floor


@dataclass
class DeviationReport:
    theta: np.ndarray
    signals: np.ndarray
    gain: np.ndarray  # probe x signal
    se: np.ndarray
    best_signal: np.ndarray
    best_gain: np.ndarray
    best_se: np.ndarray
    tolerance: float = 1e-3
    extra: dict = field(default_factory=dict)

    @property
    def max_gain(self) -> float:
        return float(np.max(self.best_gain))

    @property
    def worst_margin(self) -> float:
        """Largest gain - 3·SE over all probes and signals."""
        return float(np.max(self.gain - 3.0 * self.se))

    @property
    def certified(self) -> bool:
        return bool(np.all(self.gain <= 3.0 * self.se + self.tolerance))


def probe_types(spec: DistributionSpec, count: int = 33, grid: TypeGrid | None = None) -> np.ndarray:
    """Quantile-spaced probe types, optionally snapped to the nearest grid points."""
    t = np.asarray(spec.quantile(np.linspace(0.0, 1.0, count)), dtype=float)
    if grid is None:
        return t
    idx = np.clip(np.searchsorted(grid.points, t), 1, grid.size - 1)
    left = grid.points[idx - 1]
    right = grid.points[idx]
    return np.where(t - left <= right - t, left, right)


def _rows(fn, count: int, workers: int):
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def _opponents(spec, strategy, rng, samples, count):
    types = np.asarray(spec.quantile(rng.random((samples, count))), dtype=float)
    return np.asarray(strategy(types), dtype=float).reshape(types.shape)


def mc_interim_estimate(rule, strategy, spec: DistributionSpec, cfg: McConfig, n: int = 2,
                        eta: float = 1.0, probes=None) -> InterimEstimate:
    """Estimate Q(θ) = E[x_1(ŝ(θ), ŝ(θ_-1))] and U = Q - η(ŝ(θ) - θ)⁺ at probe types."""
    theta = probe_types(spec, cfg.probes) if probes is None else np.asarray(probes, dtype=float)
    S = int(cfg.samples)

    def row(i):
        opp = _opponents(spec, strategy, cfg.rng(i), S, n - 1)
        own = float(np.asarray(strategy(np.array([theta[i]])))[0])
        prof = np.column_stack((np.full(S, own), opp))
        x = np.asarray(rule.allocate(prof), dtype=float)[:, 0]
        return x.mean(), x.std() / math.sqrt(S), own

    out = np.array(_rows(row, theta.size, cfg.workers))
    Q_hat, Q_se, own = out[:, 0], out[:, 1], out[:, 2]
    U_hat = Q_hat - eta * np.maximum(own - theta, 0.0)
    return InterimEstimate(theta, Q_hat, Q_se, U_hat, Q_se.copy(), S)


def _generic_moments(rule, cands, opp, ref):
    S = opp.shape[0]
    xs = []
    for s in cands:
        prof = np.column_stack((np.full(S, s), opp))
        xs.append(np.asarray(rule.allocate(prof), dtype=float)[:, 0])
    X = np.array(xs)
    xref = X[ref]
    return X.mean(axis=1), (X * X).mean(axis=1), (X * xref[None, :]).mean(axis=1)


def deviation_scan(rule, strategy, spec: DistributionSpec, eta: float, cfg: McConfig, n: int = 2,
                   probes=None, signals=None, tolerance: float = 1e-3) -> DeviationReport:
    """Largest expected gain from deviating to any signal on a grid over [0, θ̄ + 1/η]."""
    theta = (np.linspace(spec.lo, spec.hi, cfg.probes) if probes is None
             else np.asarray(probes, dtype=float))
    if signals is None:
        signals = np.linspace(min(0.0, spec.lo), spec.hi + 1.0 / eta, cfg.resolution)
    signals = np.asarray(signals, dtype=float)
    S = int(cfg.samples)
    fast = isinstance(rule, PairPoolRule) and n == 2

    def row(i):
        opp = _opponents(spec, strategy, cfg.rng(i), S, n - 1)
        own = float(np.asarray(strategy(np.array([theta[i]])))[0])
        cands = np.append(signals, own)
        ref = cands.size - 1
        if fast:
            cp, cu, cr = rule.encode(cands)
            op, ou, orr = rule.encode(opp[:, 0])
            mean, sq, cross = kernels.pair_rule_moments(
                np.ascontiguousarray(cands), np.ascontiguousarray(cp, dtype=np.int64), cu, cr,
                np.ascontiguousarray(opp[:, 0]), np.ascontiguousarray(op, dtype=np.int64), ou, orr, ref)
        else:
            mean, sq, cross = _generic_moments(rule, cands, opp, ref)
        pay = mean - eta * np.maximum(cands - theta[i], 0.0)
        gain = pay[:-1] - pay[ref]
        dvar = sq[:-1] + sq[ref] - 2.0 * cross[:-1] - (mean[:-1] - mean[ref]) ** 2
        se = np.sqrt(np.maximum(dvar, 0.0) / S)
        return gain, se

    res = _rows(row, theta.size, cfg.workers)
    gain = np.array([r[0] for r in res])
    se = np.array([r[1] for r in res])
    j = np.argmax(gain, axis=1)
    rows = np.arange(theta.size)
    return DeviationReport(theta, signals, gain, se, signals[j], gain[rows, j], se[rows, j], tolerance)


def simulate_vcg(spec: DistributionSpec, n: int, k: int, eta: float, cfg: McConfig,
                 probes=None) -> InterimEstimate:
    """Empirical interim payoffs of truthful agents in the report-then-threshold mechanism."""
    if not 0 < k < n:
        raise ParameterError(f"n, k: need 0 < k < n, got n={n}, k={k}")
    theta = probe_types(spec, cfg.probes) if probes is None else np.asarray(probes, dtype=float)
    S = int(cfg.samples)

    def row(i):
        rng = cfg.rng(i)
        opp = np.asarray(spec.quantile(rng.random((S, n - 1))), dtype=float)
        types = np.column_stack((np.full(S, theta[i]), opp))
        keys = rng.random(types.shape)
        u = np.asarray(kernels.vcg_utilities(types, keys, k, eta))[:, 0]
        won = (np.sum(opp > theta[i], axis=1) < k).astype(float)
        return u.mean(), u.std() / math.sqrt(S), won.mean(), won.std() / math.sqrt(S)

    out = np.array(_rows(row, theta.size, cfg.workers))
    return InterimEstimate(theta, out[:, 2], out[:, 3], out[:, 0], out[:, 1], S)
