"""Benchmark mechanisms: the winner-takes-all contest and the VCG format."""

from __future__ import annotations

import enum
import math
import warnings

import numpy as np

from .distributions import DistributionSpec, ParameterError, efficient_allocation, integrate, make_grid
from .mechanism import MechanismPair, canonical_utility

__all__ = [
    "BaselineKind",
    "wta_pair",
    "vcg_interim_utility",
    "nonconvergence_bound",
    "efficient_utility_total",
    "wta_objective",
]


class BaselineKind(str, enum.Enum):
    WTA = "wta"
    VCG_FORMAT = "vcg-format"


def wta_pair(spec: DistributionSpec, n: int, k: int, eta: float, alpha: float = 0.5,
             M: int = 2000) -> MechanismPair:
    """Items to the k highest signals, with the least wasteful equilibrium utility."""
    if not 0 < k < n:
        raise ParameterError(f"n, k: need 0 < k < n, got n={n}, k={k}")
    grid = make_grid(spec, M)
    qe = grid.efficient_allocation(n, k)
    U = canonical_utility(qe, grid, eta, qe[0])
    return MechanismPair(grid, qe, U, eta, n, k, alpha)


def wta_objective(spec: DistributionSpec, n: int, k: int, eta: float, alpha: float, M: int = 2000) -> float:
    p = wta_pair(spec, n, k, eta, alpha, M)
    return float(p.grid.expect(alpha * p.theta * p.Q + (1.0 - alpha) * p.U))


def vcg_interim_utility(spec: DistributionSpec, n: int, k: int, eta: float, theta):
    """U^S(θ) = η ∫_{θ-1/η}^{θ} Q_E(t) dt, with Q_E = 0 below the support."""
    if not 0 < k < n:
        raise ParameterError(f"n, k: need 0 < k < n, got n={n}, k={k}")
    if not eta > 0:
        raise ParameterError("eta: must be positive")
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    spec.cdf(t)  # domain check
    qe = lambda z: efficient_allocation(spec, n, k, z)  # noqa: E731
    out = np.array([eta * integrate(spec, qe, max(spec.lo, x - 1.0 / eta), x) for x in t])
    return float(out[0]) if np.ndim(theta) == 0 else out


def nonconvergence_bound(theta_high: float, alpha: float, eps: float) -> float:
    """Lower bound δ on the optimal-to-WTA payoff ratio for many agents and one item."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha: must lie in (0, 1)")
    if not eps > 0:
        raise ParameterError("eps: must be positive")
    num = (theta_high - eps) * alpha + 1.0 - alpha
    den = theta_high * alpha + (1.0 - alpha) * (1.0 - 1.0 / math.e + eps)
    delta = num / den
    if delta <= 1.0:
        warnings.warn(f"ratio bound {delta:.4g} <= 1: eps={eps} is too large for the bound to bite",
                      stacklevel=2)
    return delta


def efficient_utility_total(spec: DistributionSpec, n: int, eta: float, M: int = 4000) -> float:
    """n·E[U] under the winner-takes-all contest for a single item."""
    p = wta_pair(spec, n, 1, eta, M=M)
    return float(n * p.grid.expect(p.U))
