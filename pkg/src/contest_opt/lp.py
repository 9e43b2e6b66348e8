"""Primal-dual interior-point method for sparse standard-form LPs.

Solves ``min c·x  s.t.  A x = b, x ≥ 0`` with Mehrotra's predictor-corrector
scheme.  Each Newton step solves the regularized augmented (quasi-definite)
system with a sparse LU factorization and a few rounds of iterative refinement
against the unregularized matrix.  The augmented form stays well conditioned
near degenerate optima where the normal equations lose precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

__all__ = ["LPResult", "LPError", "interior_point"]


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    converged: bool


class _Augmented:
    """Factor ``[[-H - ρI, Aᵀ], [A, δI]]`` for a diagonal ``H``."""

    def __init__(self, A: sp.csc_matrix, rho: float, delta: float):
        self.A = A
        self.AT = A.T.tocsc()
        self.m, self.n = A.shape
        self.rho = rho
        self.delta = delta
        self.h = None
        self.lu = None

    def factor(self, h: np.ndarray):
        K = sp.bmat(
            [[sp.diags(-h - self.rho), self.AT], [self.A, sp.identity(self.m) * self.delta]],
            format="csc",
        )
        try:
            self.lu = spla.splu(
                K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
        except RuntimeError as exc:
            raise LPError(f"augmented system could not be factored: {exc}") from exc
        self.h = h

    def solve(self, r1: np.ndarray, r2: np.ndarray, refine: int = 3):
        n = self.n
        rhs = np.concatenate([r1, r2])
        z = self.lu.solve(rhs)
        for _ in range(refine):
            res = rhs - np.concatenate([-self.h * z[:n] + self.AT @ z[n:], self.A @ z[:n]])
            z = z + self.lu.solve(res)
        return z[:n], z[n:]


def _step(v, dv):
    """Largest t with v + t dv ≥ 0 (inf when unbounded)."""
    neg = dv < 0
    if not neg.any():
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def interior_point(c, A, b, tol: float = 1e-9, max_iter: int = 200,
                   rho: float = 1e-10, delta: float = 1e-10) -> LPResult:
    """Mehrotra predictor-corrector on the standard-form LP ``(c, A, b)``."""
    A = sp.csc_matrix(A, dtype=float)
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    m, nvar = A.shape
    kkt = _Augmented(A, rho, delta)
    AT = kkt.AT

    # least-norm primal and least-squares dual, shifted into the interior
    kkt.factor(np.ones(nvar))
    x, _ = kkt.solve(np.zeros(nvar), b)
    _, y = kkt.solve(c, np.zeros(m))
    x = -x
    s = c - AT @ y
    x = np.maximum(np.abs(x), 1.0)
    s = np.maximum(np.abs(s), 1.0)

    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(c)
    converged = False
    it = 0
    best = None
    for it in range(1, max_iter + 1):
        rb = A @ x - b
        rc = AT @ y + s - c
        mu = float(x @ s) / nvar
        pobj = float(c @ x)
        dobj = float(b @ y)
        pres = np.linalg.norm(rb) / bnorm
        dres = np.linalg.norm(rc) / cnorm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        if not np.isfinite(pres + dres + gap):
            break
        score = max(pres, dres, gap)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), s.copy())
        if score < tol:
            converged = True
            break
        kkt.factor(s / x)

        def newton(r3):
            dx, dy = kkt.solve(-rc - r3 / x, -rb)
            ds = (r3 - s * dx) / x
            return dx, dy, ds

        dx_a, _, ds_a = newton(-x * s)
        ap = min(1.0, _step(x, dx_a))
        ad = min(1.0, _step(s, ds_a))
        mu_aff = float((x + ap * dx_a) @ (s + ad * ds_a)) / nvar
        sigma = (mu_aff / mu) ** 3
        dx, dy, ds = newton(-x * s - dx_a * ds_a + sigma * mu)
        ap = min(1.0, 0.995 * _step(x, dx))
        ad = min(1.0, 0.995 * _step(s, ds))
        if ap < 1e-12 and ad < 1e-12:
            break
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
    if not converged and best is not None:
        _, x, y, s = best
    rb = A @ x - b
    rc = AT @ y + s - c
    return LPResult(
        x=x, y=y, s=s, objective=float(c @ x), iterations=it,
        primal_residual=float(np.linalg.norm(rb) / bnorm),
        dual_residual=float(np.linalg.norm(rc) / cnorm),
        gap=float(abs(c @ x - b @ y) / (1.0 + abs(c @ x))), converged=converged,
    )
