"""Pure-numpy batched QP kernel (fallback when the compiled core is absent).

Runs the active-set iteration for all cells in lockstep: every cell advances
its own state machine once per outer pass, with converged cells frozen.
Semantics match ``ilrfv.qp.solve_qp`` and the Cython kernel; the three are
cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_DET_GUARD = 1e-14


def solve_qp_batch(G, c, A, lower, upper, eps=1e-12, max_iterations=6):
    """Solve n double-inequality QPs (2 unknowns, up to 4 constraint rows).

    Inert padding rows must have a zero ``A`` row and zero bounds.

    Returns (L, iterations, converged, status, active_j, active_s) where
    status is 0 for solved input and 1 where G was not numerically SPD.
    """
    G = np.ascontiguousarray(G, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    A = np.ascontiguousarray(A, dtype=float)
    lower = np.ascontiguousarray(lower, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    n, nrows = A.shape[0], A.shape[1]

    det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    norm2 = (G * G).sum(axis=(1, 2))
    bad = ~((det >= _DET_GUARD * norm2) & (G[:, 0, 0] > 0.0))
    safe_det = np.where(bad, 1.0, det)
    Ginv = np.empty_like(G)
    Ginv[:, 0, 0] = G[:, 1, 1] / safe_det
    Ginv[:, 1, 1] = G[:, 0, 0] / safe_det
    Ginv[:, 0, 1] = -G[:, 0, 1] / safe_det
    Ginv[:, 1, 0] = -G[:, 1, 0] / safe_det
    gc = np.einsum("nij,nj->ni", Ginv, c)

    tol = eps * np.maximum((upper - lower).max(axis=1), 1e-300)

    L = np.zeros((n, 2))
    act_j = np.full((n, 2), -1, dtype=np.int32)
    act_s = np.zeros((n, 2), dtype=np.int8)
    iters = np.zeros(n, dtype=np.int32)
    converged = np.zeros(n, dtype=bool)
    status = np.zeros(n, dtype=np.uint8)
    status[bad] = 1
    done = bad.copy()

    idx = np.arange(n)
    for it in range(1, max_iterations + 1):
        run = ~done
        if not run.any():
            break
        iters[run] = it

        has0 = act_j[:, 0] >= 0
        has1 = act_j[:, 1] >= 0
        j0 = np.where(has0, act_j[:, 0], 0)
        j1 = np.where(has1, act_j[:, 1], 0)
        r0 = A[idx, j0] * act_s[:, 0, None]
        r1 = A[idx, j1] * act_s[:, 1, None]
        r0[~has0] = 0.0
        r1[~has1] = 0.0

        rhs = L + gc
        Gr0 = np.einsum("nij,nj->ni", Ginv, r0)
        Gr1 = np.einsum("nij,nj->ni", Ginv, r1)
        S00 = (r0 * Gr0).sum(axis=1)
        S01 = (r0 * Gr1).sum(axis=1)
        S11 = (r1 * Gr1).sum(axis=1)
        b0 = (r0 * rhs).sum(axis=1)
        b1 = (r1 * rhs).sum(axis=1)

        scale = (r0 * r0).sum(axis=1) * np.abs(Ginv).max(axis=(1, 2))
        scale2 = scale * ((r1 * r1).sum(axis=1) * np.abs(Ginv).max(axis=(1, 2)))
        detS = S00 * S11 - S01 * S01
        deg = np.zeros(n, dtype=bool)
        deg[has0 & ~has1] = ~(
            np.abs(S00[has0 & ~has1]) > _DET_GUARD * np.maximum(scale[has0 & ~has1], 1e-300)
        )
        deg[has1] = ~(
            np.abs(detS[has1]) > _DET_GUARD * np.maximum(scale2[has1], 1e-300)
        )

        lam0 = np.zeros(n)
        lam1 = np.zeros(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            l1_only = np.where(S00 != 0.0, b0 / S00, 0.0)
            safe = np.where(detS != 0.0, detS, 1.0)
            l0_pair = (S11 * b0 - S01 * b1) / safe
            l1_pair = (S00 * b1 - S01 * b0) / safe
        one = has0 & ~has1 & ~deg
        two = has1 & ~deg
        lam0[one] = l1_only[one]
        lam0[two] = l0_pair[two]
        lam1[two] = l1_pair[two]

        p = lam0[:, None] * Gr0 + lam1[:, None] * Gr1 - rhs
        p[deg] = 0.0
        # Two independent active rows pin p exactly; with one active row,
        # strip the roundoff component along it (M p = 0 analytically).
        p[two] = 0.0
        rp = (r0 * p).sum(axis=1)
        rr = (r0 * r0).sum(axis=1)
        proj = np.where(one & (rr > 0.0), rp / np.where(rr > 0.0, rr, 1.0), 0.0)
        p -= proj[:, None] * r0

        ap = np.einsum("nkj,nj->nk", A, p)
        pzero = np.abs(ap).max(axis=1) <= tol

        # Degenerate KKT: drop the most recently added constraint, no move.
        drop_deg = run & deg
        shift1 = drop_deg & has1
        act_j[shift1, 1] = -1
        act_s[shift1, 1] = 0
        only0 = drop_deg & ~has1
        act_j[only0, 0] = -1
        act_s[only0, 0] = 0

        # Stationary point: converge or drop the most negative multiplier.
        stat = run & ~deg & pzero
        lammin = np.where(has1, np.minimum(lam0, lam1), lam0)
        ok = stat & (~has0 | (lammin >= -tol))
        converged[ok] = True
        done[ok] = True
        drop = stat & ~ok
        drop0 = drop & (~has1 | (lam0 <= lam1))
        drop1 = drop & ~drop0
        act_j[drop1, 1] = -1
        act_s[drop1, 1] = 0
        # Removing slot 0 promotes slot 1 to preserve insertion order.
        act_j[drop0, 0] = act_j[drop0, 1]
        act_s[drop0, 0] = act_s[drop0, 1]
        act_j[drop0, 1] = -1
        act_s[drop0, 1] = 0

        # Line search along p for the rest.
        move = run & ~deg & ~pzero
        if move.any():
            aL = np.einsum("nkj,nj->nk", A, L)
            beta = np.full((n, nrows), np.inf)
            tt = tol[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                up = ap > tt
                dn = ap < -tt
                beta[up] = ((upper - aL)[up]) / ap[up]
                beta[dn] = ((lower - aL)[dn]) / ap[dn]
            jb = np.argmin(beta, axis=1)
            bmin = beta[idx, jb]
            alpha = np.minimum(1.0, np.maximum(bmin, 0.0))
            L[move] += alpha[move, None] * p[move]
            blocked = move & (bmin <= 1.0)
            # Never re-add a constraint that is already in the active set.
            blocked &= (act_j[:, 0] != jb) & (act_j[:, 1] != jb)
            sign = -np.sign(ap[idx, jb]).astype(np.int8)
            free1 = blocked & (act_j[:, 0] >= 0) & (act_j[:, 1] < 0)
            free0 = blocked & (act_j[:, 0] < 0)
            act_j[free0, 0] = jb[free0]
            act_s[free0, 0] = sign[free0]
            act_j[free1, 1] = jb[free1]
            act_s[free1, 1] = sign[free1]

    return L, iters, converged, status, act_j, act_s
