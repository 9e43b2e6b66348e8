"""Type distributions on a bounded support and order-statistic quantities.

Three families are supported: uniform, power (``F(θ) = x**p`` on the
normalized support) and piecewise-linear cdfs given by knots.  All objects
are immutable; module-level functions mirror the methods for callers that
prefer a functional style.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "ParameterError",
    "DistributionSpec",
    "TypeGrid",
    "make_grid",
    "cdf",
    "pdf",
    "quantile",
    "efficient_allocation",
    "efficient_allocation_slope",
    "efficient_tail_integral",
    "integrate",
    "sample_types",
    "convexity_threshold",
]

_SUPPORT_TOL = 1e-12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)


class DomainError(ValueError):
    """Argument outside the support (or outside [0, 1] for quantiles)."""


class ParameterError(ValueError):
    """Invalid model parameters such as k >= n."""


@dataclass(frozen=True)
class DistributionSpec:
    """A type distribution with cdf, pdf and quantile on ``support``.

    ``family`` is one of ``"uniform"``, ``"power"`` or ``"piecewise"``.  For
    the piecewise family the support is read off the first and last knot.
    """

    family: str = "uniform"
    p: float = 1.0
    support: tuple[float, float] = (0.0, 1.0)
    knots: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in ("uniform", "power", "piecewise"):
            raise ParameterError(f"family: unknown distribution family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == "piecewise":
            if len(self.knots) < 2:
                raise ParameterError("knots: need at least two knots")
            knots = tuple((float(t), float(c)) for t, c in self.knots)
            ts = np.array([t for t, _ in knots])
            cs = np.array([c for _, c in knots])
            if np.any(np.diff(ts) <= 0):
                raise ParameterError("knots: types must be strictly increasing")
            if np.any(np.diff(cs) <= 0):
                raise ParameterError("knots: cdf values must be strictly increasing (positive density)")
            if abs(cs[0]) > 1e-12 or abs(cs[-1] - 1.0) > 1e-12:
                raise ParameterError("knots: cdf must run from 0 to 1")
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "support", (float(ts[0]), float(ts[-1])))
        else:
            lo, hi = (float(v) for v in self.support)
            if not (0.0 <= lo < hi < math.inf):
                raise ParameterError("support: need 0 <= lo < hi < inf")
            object.__setattr__(self, "support", (lo, hi))
            if fam == "power":
                if not (self.p > 0 and math.isfinite(self.p)):
                    raise ParameterError("p: power exponent must be positive")
                object.__setattr__(self, "p", float(self.p))
            else:
                object.__setattr__(self, "p", 1.0)

    @property
    def lo(self) -> float:
        return self.support[0]

    @property
    def hi(self) -> float:
        return self.support[1]

    @property
    def width(self) -> float:
        return self.support[1] - self.support[0]

    @cached_property
    def _knot_arrays(self):
        ts = np.array([t for t, _ in self.knots])
        cs = np.array([c for _, c in self.knots])
        return ts, cs

    def breakpoints(self) -> np.ndarray:
        """Points where the density may be non-smooth, including the support ends."""
        if self.family == "piecewise":
            return self._knot_arrays[0].copy()
        return np.array([self.lo, self.hi])

    def _check_support(self, theta):
        t = np.asarray(theta, dtype=float)
        tol = _SUPPORT_TOL * max(1.0, self.hi)
        if np.any(t < self.lo - tol) or np.any(t > self.hi + tol) or np.any(np.isnan(t)):
            raise DomainError(f"theta outside support [{self.lo}, {self.hi}]")
        return np.clip(t, self.lo, self.hi)

    def cdf(self, theta):
        t = self._check_support(theta)
        if self.family == "piecewise":
            ts, cs = self._knot_arrays
            out = np.interp(t, ts, cs)
        else:
            x = (t - self.lo) / self.width
            out = x if self.family == "uniform" else x ** self.p
        return out if np.ndim(out) else float(out)

    def pdf(self, theta):
        t = self._check_support(theta)
        if self.family == "piecewise":
            ts, cs = self._knot_arrays
            slopes = np.diff(cs) / np.diff(ts)
            idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(slopes) - 1)
            out = slopes[idx]
        elif self.family == "uniform":
            out = np.full_like(t, 1.0 / self.width)
        else:
            x = (t - self.lo) / self.width
            with np.errstate(divide="ignore"):
                out = self.p * x ** (self.p - 1.0) / self.width
        return out if np.ndim(out) else float(out)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < -1e-12) or np.any(u > 1 + 1e-12) or np.any(np.isnan(u)):
            raise DomainError("quantile argument outside [0, 1]")
        u = np.clip(u, 0.0, 1.0)
        if self.family == "piecewise":
            ts, cs = self._knot_arrays
            out = np.interp(u, cs, ts)
        elif self.family == "uniform":
            out = self.lo + self.width * u
        else:
            out = self.lo + self.width * u ** (1.0 / self.p)
        return out if np.ndim(out) else float(out)

    # Density bounds used by the convexity threshold for Q_E.

    @property
    def min_density(self) -> float:
        """Infimum of f on the support (0 for power families with p > 1)."""
        if self.family == "uniform":
            return 1.0 / self.width
        if self.family == "power":
            return self.p / self.width if self.p <= 1 else 0.0
        return float(np.min(np.diff(self._knot_arrays[1]) / np.diff(self._knot_arrays[0])))

    @property
    def max_density(self) -> float:
        """Supremum of f on the support (inf for power families with p < 1)."""
        if self.family == "uniform":
            return 1.0 / self.width
        if self.family == "power":
            return self.p / self.width if self.p >= 1 else math.inf
        return float(np.max(np.diff(self._knot_arrays[1]) / np.diff(self._knot_arrays[0])))

    @property
    def max_density_decrease(self) -> float:
        """Bound on -f'(θ); infinite when f jumps downward."""
        if self.family == "uniform":
            return 0.0
        if self.family == "power":
            return 0.0 if self.p >= 1 else math.inf
        slopes = np.diff(self._knot_arrays[1]) / np.diff(self._knot_arrays[0])
        return math.inf if np.any(np.diff(slopes) < 0) else 0.0

    def partial_mean(self, a, b) -> float:
        """∫_a^b θ dF(θ), exact for every family."""
        a = float(self._check_support(a))
        b = float(self._check_support(b))
        if b <= a:
            return 0.0
        if self.family == "piecewise":
            ts, cs = self._knot_arrays
            cuts = np.concatenate(([a], ts[(ts > a) & (ts < b)], [b]))
            dens = np.asarray(self.pdf(0.5 * (cuts[:-1] + cuts[1:])))
            return float(np.sum(dens * 0.5 * (cuts[1:] ** 2 - cuts[:-1] ** 2)))
        p = self.p
        xa, xb = (a - self.lo) / self.width, (b - self.lo) / self.width
        return float(self.lo * (xb**p - xa**p) + self.width * p / (p + 1.0) * (xb ** (p + 1) - xa ** (p + 1)))

    def expect_between(self, fun, a, b) -> float:
        """∫_a^b fun(θ) dF(θ) by Gauss-Legendre in probability space."""
        a = float(self._check_support(a))
        b = float(self._check_support(b))
        if b <= a:
            return 0.0
        ua, ub = float(self.cdf(a)), float(self.cdf(b))
        cuts = [ua, ub]
        if self.family == "piecewise":
            cs = self._knot_arrays[1]
            cuts = [ua, *cs[(cs > ua) & (cs < ub)], ub]
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (hi - lo)
            u = lo + half * (_GL_NODES + 1.0)
            total += half * float(np.dot(_GL_WEIGHTS, fun(np.asarray(self.quantile(u)))))
        return total

    def to_dict(self) -> dict:
        if self.family == "piecewise":
            return {"family": "piecewise", "knots": [list(k) for k in self.knots]}
        d = {"family": self.family, "support": list(self.support)}
        if self.family == "power":
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        if not isinstance(d, dict) or "family" not in d:
            raise ParameterError("distribution: expected an object with a 'family' field")
        fam = str(d["family"]).lower()
        if fam == "piecewise":
            return cls(family=fam, knots=tuple(tuple(k) for k in d.get("knots", ())))
        support = tuple(d.get("support", (0.0, 1.0)))
        if len(support) != 2:
            raise ParameterError("support: expected [lo, hi]")
        return cls(family=fam, p=float(d.get("p", 1.0)), support=support)


def convexity_threshold(spec: DistributionSpec) -> float:
    """Agent count beyond which Q_E is guaranteed convex: 2 + β₂/β̲₁²."""
    b1 = spec.min_density
    b2 = spec.max_density_decrease
    if b2 == 0:
        return 2.0
    if b1 <= 0 or not math.isfinite(b2):
        return math.inf
    return 2.0 + b2 / b1**2


@dataclass(frozen=True)
class TypeGrid:
    """Uniformly spaced points on the support with quadrature weights.

    Each weight is the exact probability of the dual cell around its point,
    so the weights sum to one and tail sums are exact for step functions.
    """

    spec: DistributionSpec
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("points", "weights"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.points.shape != self.weights.shape or self.points.ndim != 1:
            raise ValueError("points and weights must be 1-D arrays of equal length")

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.points)

    def expect(self, values) -> float:
        return float(np.dot(self.weights, values))

    def tail_sums(self, values) -> np.ndarray:
        """``T_j = Σ_{l≥j} w_l v_l``."""
        return np.cumsum((self.weights * np.asarray(values))[::-1])[::-1]

    def efficient_allocation(self, n: int, k: int) -> np.ndarray:
        return efficient_allocation(self.spec, n, k, self.points)


def make_grid(spec: DistributionSpec, M: int = 2000) -> TypeGrid:
    if M < 2:
        raise ParameterError("grid: need at least 2 cells")
    pts = np.linspace(spec.lo, spec.hi, M + 1)
    half = 0.5 * (spec.hi - spec.lo) / M
    upper = spec.cdf(np.minimum(pts + half, spec.hi))
    lower = spec.cdf(np.maximum(pts - half, spec.lo))
    return TypeGrid(spec, pts, upper - lower)


def cdf(spec: DistributionSpec, theta):
    return spec.cdf(theta)


def pdf(spec: DistributionSpec, theta):
    return spec.pdf(theta)


def quantile(spec: DistributionSpec, u):
    return spec.quantile(u)


def _check_nk(n: int, k: int):
    if int(n) != n or int(k) != k:
        raise ParameterError("n and k must be integers")
    if not (0 < k < n):
        raise ParameterError(f"need 0 < k < n, got n={n}, k={k}")


def _binomial_sum(F, n: int, k: int):
    """Σ_{j<k} C(n-1,j) (1-F)^j F^(n-1-j), in log-space for large n."""
    F = np.asarray(F, dtype=float)
    j = np.arange(k).reshape((-1,) + (1,) * F.ndim)
    if n <= 60:
        coef = np.array([math.comb(n - 1, i) for i in range(k)], dtype=float)
        coef = coef.reshape(j.shape)
        terms = coef * (1.0 - F) ** j * F ** (n - 1 - j)
    else:
        logc = special.gammaln(n) - special.gammaln(j + 1) - special.gammaln(n - j)
        with np.errstate(divide="ignore"):
            logt = logc + special.xlogy(j, 1.0 - F) + special.xlogy(n - 1 - j, F)
        terms = np.exp(logt)
    return np.clip(terms.sum(axis=0), 0.0, 1.0)


def efficient_allocation(spec: DistributionSpec, n: int, k: int, theta):
    """Interim probability that a type θ is among the top k of n."""
    _check_nk(n, k)
    out = _binomial_sum(spec.cdf(theta), n, k)
    return out if np.ndim(out) else float(out)


def efficient_allocation_slope(spec: DistributionSpec, n: int, k: int, theta):
    """dQ_E/dθ = f F^(n-k-1) (1-F)^(k-1) / B(n-k, k)."""
    _check_nk(n, k)
    F = np.asarray(spec.cdf(theta), dtype=float)
    with np.errstate(divide="ignore"):
        logd = (special.xlogy(n - k - 1, F) + special.xlogy(k - 1, 1.0 - F)
                - special.betaln(n - k, k))
    out = np.asarray(spec.pdf(theta)) * np.exp(logd)
    return out if np.ndim(out) else float(out)


def efficient_tail_integral(spec: DistributionSpec, n: int, k: int, theta):
    """∫_θ^θ̄ Q_E dF, via (1/n) Σ_{j<k} (1 - I_F(n-j, j+1))."""
    _check_nk(n, k)
    F = np.asarray(spec.cdf(theta), dtype=float)
    j = np.arange(k).reshape((-1,) + (1,) * F.ndim)
    out = (1.0 - special.betainc(n - j, j + 1, F)).sum(axis=0) / n
    return out if np.ndim(out) else float(out)


def integrate(spec: DistributionSpec, fun, lo: float, hi: float) -> float:
    """Gauss-Legendre quadrature of ``fun`` on [lo, hi], split at the knots."""
    if hi <= lo:
        return 0.0
    cuts = spec.breakpoints()
    cuts = np.concatenate(([lo], cuts[(cuts > lo) & (cuts < hi)], [hi]))
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (b - a)
        x = a + half * (_GL_NODES + 1.0)
        total += half * float(np.dot(_GL_WEIGHTS, fun(x)))
    return total


def sample_types(spec: DistributionSpec, n: int, count: int, seed=None) -> np.ndarray:
    """Draw ``count`` i.i.d. type profiles of ``n`` agents by inversion."""
    if count < 1:
        raise ParameterError("count must be at least 1")
    rng = np.random.default_rng(seed)
    draws = np.asarray(spec.quantile(rng.random((count, n))))
    if count >= 10_000:
        flat = np.sort(draws.ravel())
        m = flat.size
        F = np.asarray(spec.cdf(flat))
        ks = max(np.max(np.arange(1, m + 1) / m - F), np.max(F - np.arange(m) / m))
        if ks >= 2.0 / math.sqrt(m):
            warnings.warn(f"sample KS statistic {ks:.4g} exceeds 2/sqrt(count)", RuntimeWarning)
    return draws
