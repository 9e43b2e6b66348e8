"""Pure numpy implementations of the hot loops.

These mirror ``_ckernels.pyx`` signature for signature and are used when the
compiled extension is unavailable or ``CONTEST_OPT_PURE=1`` is set.
"""

import numpy as np

_CHUNK = 4_000_000


def canonical_sweep(theta, Q, eta, u0):
    """U_0 = u0, U_j = min(U_{j-1} + η(θ_j - θ_{j-1}), Q_j)."""
    theta = np.asarray(theta, dtype=float)
    Q = np.asarray(Q, dtype=float)
    # min over i <= j of Q_i + η(θ_j - θ_i), folded with the u0 line.
    shifted = np.minimum.accumulate(np.concatenate(([u0 - eta * theta[0]], Q - eta * theta)))
    return np.minimum(shifted[1:] + eta * theta, Q) if theta.size else Q.copy()


def coarse_allocate(signals, pool_lo, pool_hi, k):
    """Coarse-ranking contest allocation for each row of ``signals``."""
    s = np.asarray(signals, dtype=float)
    lo = np.asarray(pool_lo, dtype=float)
    hi = np.asarray(pool_hi, dtype=float)
    ceil = s.copy()
    if lo.size:
        idx = np.searchsorted(lo, s, side="right") - 1
        safe = np.clip(idx, 0, lo.size - 1)
        inside = (idx >= 0) & (s > lo[safe]) & (s < hi[safe])
        ceil = np.where(inside, hi[safe], s)
    S, n = s.shape
    out = np.empty_like(s)
    rows = max(1, _CHUNK // max(1, n * n))
    for a in range(0, S, rows):
        sc, cc = s[a:a + rows], ceil[a:a + rows]
        r = np.sum(sc[:, None, :] > cc[:, :, None], axis=2)
        z = np.sum(cc[:, None, :] == cc[:, :, None], axis=2)
        out[a:a + rows] = np.clip((k - r) / z, 0.0, 1.0)
    return out


def pair_rule_moments(cs, cp, cu, cr, os_, op, ou, orr, ref):
    """First and cross moments of the two-agent pooled rule's win indicator.

    Each candidate (c*) is played against every opponent draw (o*).  Signals
    carry a pool index (``-1`` outside pools), the pool coordinate ``u`` and
    the tilt ``r(u)``.  Returns per-candidate mean, mean square, and mean of
    the product with candidate ``ref``.
    """
    cs, cu, cr = (np.asarray(a, dtype=float) for a in (cs, cu, cr))
    cp = np.asarray(cp, dtype=np.int64)
    os_, ou, orr = (np.asarray(a, dtype=float) for a in (os_, ou, orr))
    op = np.asarray(op, dtype=np.int64)
    C, S = cs.size, os_.size
    mean = np.zeros(C)
    sq = np.zeros(C)
    cross = np.zeros(C)

    def win(i):
        same = (cp[i][:, None] == op[None, :]) & (cp[i][:, None] >= 0)
        raw = np.where(cs[i][:, None] > os_[None, :], 1.0, np.where(cs[i][:, None] < os_[None, :], 0.0, 0.5))
        up = cu[i][:, None] > ou[None, :]
        down = cu[i][:, None] < ou[None, :]
        pooled = np.where(up, 0.5 + 0.5 * orr[None, :], np.where(down, 0.5 - 0.5 * cr[i][:, None], 0.5))
        return np.where(same, pooled, raw)

    xref = win(np.array([ref]))[0]
    rows = max(1, _CHUNK // max(1, S))
    for a in range(0, C, rows):
        idx = np.arange(a, min(C, a + rows))
        x = win(idx)
        mean[idx] = x.mean(axis=1)
        sq[idx] = (x * x).mean(axis=1)
        cross[idx] = (x * xref[None, :]).mean(axis=1)
    return mean, sq, cross


def vcg_utilities(types, keys, k, eta):
    """Interim payoffs in the report-then-threshold mechanism, per profile."""
    t = np.asarray(types, dtype=float)
    S, n = t.shape
    order = np.lexsort((np.asarray(keys, dtype=float), t), axis=-1)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(n)[None, :].repeat(S, axis=0), axis=-1)
    winners = rank >= n - k
    threshold = np.take_along_axis(t, order[:, n - k - 1:n - k], axis=-1)
    return np.where(winners, np.clip(eta * (t - threshold), 0.0, 1.0), 0.0)
