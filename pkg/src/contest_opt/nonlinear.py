"""Discrete-type contests with convex effort costs.

With finitely many types and a cost C(e) that is convex with a concave
derivative, any monotone interim allocation can be implemented by a contest
with deterministic signal targets.  The targets are built upward: each type is
made exactly indifferent to mimicking the next type up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .distributions import ParameterError
from .mechanism import ConstructionError

__all__ = [
    "CostFamily",
    "CostSpec",
    "DiscreteTypeModel",
    "DiscreteContest",
    "DiscreteICReport",
    "construct_discrete_contest",
    "certainty_equivalent_effort",
    "recommendation_cost_gap",
    "global_ic_check_discrete",
    "menu_utility",
    "load_discrete_model",
]

IC_TOL = 1e-9


class CostFamily(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    POWER = "power"


@dataclass(frozen=True)
class CostSpec:
    """Effort cost C(e): linear ``scale·e``, quadratic ``scale·e²/2`` or power ``scale·e^power``.

    Power exponents are limited to [1, 2], where C'' ≥ 0 and C''' ≤ 0.
    """

    family: CostFamily = CostFamily.QUADRATIC
    scale: float = 1.0
    power: float = 2.0

    def __post_init__(self):
        try:
            fam = CostFamily(self.family)
        except ValueError:
            raise ParameterError(f"cost.family: unknown cost family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ParameterError("cost.c: scale must be positive and finite")
        if fam is CostFamily.POWER and not 1.0 <= self.power <= 2.0:
            raise ParameterError("cost.p: power exponent must lie in [1, 2]")

    @classmethod
    def linear(cls, eta: float) -> "CostSpec":
        return cls(CostFamily.LINEAR, eta, 1.0)

    @classmethod
    def quadratic(cls, c: float = 1.0) -> "CostSpec":
        return cls(CostFamily.QUADRATIC, c, 2.0)

    @classmethod
    def power_law(cls, c: float, p: float) -> "CostSpec":
        return cls(CostFamily.POWER, c, p)

    @classmethod
    def from_dict(cls, d: dict) -> "CostSpec":
        fam = d.get("family", "quadratic")
        if fam == "linear":
            return cls.linear(float(d.get("eta", d.get("c", 1.0))))
        if fam == "quadratic":
            return cls.quadratic(float(d.get("c", 1.0)))
        if fam == "power":
            return cls.power_law(float(d.get("c", 1.0)), float(d.get("p", 2.0)))
        raise ParameterError(f"cost.family: unknown cost family {fam!r}")

    def to_dict(self) -> dict:
        if self.family is CostFamily.LINEAR:
            return {"family": "linear", "eta": self.scale}
        if self.family is CostFamily.QUADRATIC:
            return {"family": "quadratic", "c": self.scale}
        return {"family": "power", "c": self.scale, "p": self.power}

    def _exponent(self) -> float:
        return {CostFamily.LINEAR: 1.0, CostFamily.QUADRATIC: 2.0}.get(self.family, self.power)

    def _coef(self) -> float:
        return self.scale / 2.0 if self.family is CostFamily.QUADRATIC else self.scale

    def __call__(self, e):
        e = np.maximum(np.asarray(e, dtype=float), 0.0)
        return self._coef() * e ** self._exponent()

    def derivative(self, e):
        e = np.maximum(np.asarray(e, dtype=float), 0.0)
        p = self._exponent()
        return self._coef() * p * e ** (p - 1.0)

    def inverse(self, y):
        """Effort whose cost is ``y`` (y ≥ 0)."""
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise ParameterError("cost inverse needs a non-negative cost level")
        return (y / self._coef()) ** (1.0 / self._exponent())

    def signal_cost(self, s, theta):
        """c(s|θ) = C((s - θ)⁺)."""
        return self(np.asarray(s, dtype=float) - np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class DiscreteTypeModel:
    types: np.ndarray
    probs: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.types, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        q = np.asarray(self.Q, dtype=float).ravel()
        if t.size == 0:
            raise ParameterError("types: need at least one type")
        if p.shape != t.shape or q.shape != t.shape:
            raise ParameterError("probs, Q: must have one entry per type")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise ParameterError("types: must be finite and strictly increasing")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError("probs: must be non-negative and sum to 1")
        if np.any(q < 0) or np.any(q > 1):
            raise ParameterError("Q: allocations must lie in [0, 1]")
        if np.any(np.diff(q) < 0):
            raise ParameterError("Q: interim allocation must be non-decreasing")
        for name, arr in (("types", t), ("probs", p), ("Q", q)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return int(self.types.size)

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteTypeModel":
        for key in ("types", "probs", "Q"):
            if key not in d:
                raise ParameterError(f"{key}: missing from discrete model")
        return cls(d["types"], d["probs"], d["Q"])

    def to_dict(self) -> dict:
        return {"types": self.types.tolist(), "probs": self.probs.tolist(), "Q": self.Q.tolist()}


@dataclass(frozen=True)
class DiscreteContest:
    """Signal targets and interim utilities of the constructed contest."""

    signals: np.ndarray
    utility: np.ndarray
    efforts: np.ndarray

    def expected_utility(self, model: DiscreteTypeModel) -> float:
        return float(model.probs @ self.utility)


@dataclass(frozen=True)
class DiscreteICReport:
    passed: bool
    worst_gain: float
    pair: tuple[int, int] | None  # (true type index, mimicked type index) of the worst deviation
    gains: np.ndarray

    def __bool__(self):
        return self.passed


def construct_discrete_contest(model: DiscreteTypeModel, cost: CostSpec) -> DiscreteContest:
    """Lowest type gets its allocation for free; each higher target leaves the type below indifferent."""
    t, Q = model.types, model.Q
    m = t.size
    s = np.empty(m)
    U = np.empty(m)
    s[0], U[0] = t[0], Q[0]
    for j in range(1, m):
        gap = Q[j] - U[j - 1]
        if gap < -1e-12:
            raise ConstructionError(f"allocation at type {j} is below the utility of type {j - 1}")
        s[j] = t[j - 1] + float(cost.inverse(max(gap, 0.0)))
        U[j] = Q[j] - float(cost.signal_cost(s[j], t[j]))
    return DiscreteContest(s, U, np.maximum(s - t, 0.0))


def menu_utility(cost: CostSpec, types, Q, signals) -> np.ndarray:
    """Payoff matrix: entry (j, l) is Q[l] - C((s[l] - θ_j)⁺)."""
    t = np.asarray(types, dtype=float)
    return np.asarray(Q, dtype=float)[None, :] - cost.signal_cost(np.asarray(signals, dtype=float)[None, :],
                                                                  t[:, None])


def global_ic_check_discrete(model: DiscreteTypeModel, cost: CostSpec, signals, utility,
                             tol: float = IC_TOL) -> DiscreteICReport:
    """Check that no type gains more than ``tol`` by producing another type's signal."""
    gains = menu_utility(cost, model.types, model.Q, signals) - np.asarray(utility, dtype=float)[:, None]
    j, l = np.unravel_index(int(np.argmax(gains)), gains.shape)
    worst = float(gains[j, l])
    ok = worst <= tol
    return DiscreteICReport(ok, worst, None if ok else (int(j), int(l)), gains)


def _weights(efforts, weights):
    e = np.asarray(efforts, dtype=float).ravel()
    if e.size == 0 or np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ParameterError("efforts: need a non-empty set of non-negative finite values")
    if weights is None:
        return e, np.full(e.size, 1.0 / e.size)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != e.shape or np.any(w < 0) or not w.sum() > 0:
        raise ParameterError("weights: need one non-negative weight per effort")
    return e, w / w.sum()


def certainty_equivalent_effort(cost: CostSpec, efforts, weights=None) -> float:
    """Deterministic effort e_G with C(e_G) = E_G[C(e)]."""
    e, w = _weights(efforts, weights)
    return float(cost.inverse(w @ cost(e)))


def recommendation_cost_gap(cost: CostSpec, efforts, weights=None, eps: float = 0.0) -> float:
    """C(ε + e_G) - E_G[C(ε + e)], which is non-negative for admissible costs."""
    e, w = _weights(efforts, weights)
    eg = float(cost.inverse(w @ cost(e)))
    return float(cost(eps + eg) - w @ cost(eps + e))


def load_discrete_model(path) -> tuple[DiscreteTypeModel, CostSpec]:
    """Read ``{"types", "probs", "Q", "cost": {"family", ...}}`` from a JSON file."""
    with open(Path(path)) as fh:
        d = json.load(fh)
    return DiscreteTypeModel.from_dict(d), CostSpec.from_dict(d.get("cost", {}))
