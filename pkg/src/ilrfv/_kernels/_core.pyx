# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched QP kernel: per-cell active-set iteration in C loops.

Same algorithm and tolerances as the numpy fallback and the reference
solver in ``ilrfv.qp``; this version simply runs each cell's iteration in
tight scalar code.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

BACKEND_NAME = "cython"

cdef double DET_GUARD = 1e-14


cdef inline double _absmax3(double a, double b, double d) nogil:
    cdef double m = fabs(a)
    if fabs(b) > m:
        m = fabs(b)
    if fabs(d) > m:
        m = fabs(d)
    return m


def solve_qp_batch(object G_in, object c_in, object A_in, object lower_in,
                   object upper_in, double eps=1e-12, int max_iterations=6):
    """Batched twin of ``ilrfv.qp.solve_qp``; see the fallback docstring."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] G = np.ascontiguousarray(G_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] A = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lb = np.ascontiguousarray(lower_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ub = np.ascontiguousarray(upper_in, dtype=np.float64)

    cdef Py_ssize_t n = A.shape[0]
    cdef int nrows = <int> A.shape[1]
    if nrows > 4:
        raise ValueError("at most 4 constraint rows are supported")

    cdef cnp.ndarray[cnp.float64_t, ndim=2] L = np.zeros((n, 2), dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] iters = np.zeros(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] converged = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] status = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] act_j = np.full((n, 2), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int8_t, ndim=2] act_s = np.zeros((n, 2), dtype=np.int8)

    cdef Py_ssize_t i
    cdef int it, j, k, m, jb, sign, worst
    cdef double g00, g01, g11, det, norm2, i00, i01, i11
    cdef double gc0, gc1, u, tol, lx, ly, px, py
    cdef double r0x, r0y, r1x, r1y, gr0x, gr0y, gr1x, gr1y
    cdef double s00, s01, s11, b0, b1, lam0, lam1, dets, scale0, scale1
    cdef double rhs0, rhs1, apmax, ap, aL, beta, bmin, alpha, span, rr, proj
    cdef double apj[4]
    cdef int dropped, conv

    for i in range(n):
        g00 = G[i, 0, 0]; g01 = G[i, 0, 1]; g11 = G[i, 1, 1]
        det = g00 * g11 - g01 * G[i, 1, 0]
        norm2 = g00 * g00 + 2.0 * g01 * g01 + g11 * g11
        if not (det >= DET_GUARD * norm2 and g00 > 0.0):
            status[i] = 1
            continue
        i00 = g11 / det; i01 = -g01 / det; i11 = g00 / det
        gc0 = i00 * c[i, 0] + i01 * c[i, 1]
        gc1 = i01 * c[i, 0] + i11 * c[i, 1]

        u = 0.0
        for j in range(nrows):
            span = ub[i, j] - lb[i, j]
            if span > u:
                u = span
        if u < 1e-300:
            u = 1e-300
        tol = eps * u

        lx = 0.0; ly = 0.0
        act_j[i, 0] = -1; act_j[i, 1] = -1
        conv = 0
        it = 0
        while it < max_iterations:
            it += 1
            m = 0
            if act_j[i, 0] >= 0:
                m += 1
            if act_j[i, 1] >= 0:
                m += 1
            rhs0 = lx + gc0
            rhs1 = ly + gc1

            dropped = 0
            if m == 0:
                px = -rhs0; py = -rhs1
                lam0 = 0.0; lam1 = 0.0
            else:
                j = act_j[i, 0]
                r0x = act_s[i, 0] * A[i, j, 0]
                r0y = act_s[i, 0] * A[i, j, 1]
                gr0x = i00 * r0x + i01 * r0y
                gr0y = i01 * r0x + i11 * r0y
                s00 = r0x * gr0x + r0y * gr0y
                b0 = r0x * rhs0 + r0y * rhs1
                scale0 = (r0x * r0x + r0y * r0y) * _absmax3(i00, i01, i11)
                if m == 1:
                    if not (fabs(s00) > DET_GUARD * (scale0 if scale0 > 1e-300 else 1e-300)):
                        act_j[i, 0] = -1
                        act_s[i, 0] = 0
                        dropped = 1
                    else:
                        lam0 = b0 / s00
                        lam1 = 0.0
                        px = lam0 * gr0x - rhs0
                        py = lam0 * gr0y - rhs1
                        # r0 . p = 0 analytically; strip the roundoff part.
                        rr = r0x * r0x + r0y * r0y
                        if rr > 0.0:
                            proj = (r0x * px + r0y * py) / rr
                            px -= proj * r0x
                            py -= proj * r0y
                else:
                    k = act_j[i, 1]
                    r1x = act_s[i, 1] * A[i, k, 0]
                    r1y = act_s[i, 1] * A[i, k, 1]
                    gr1x = i00 * r1x + i01 * r1y
                    gr1y = i01 * r1x + i11 * r1y
                    s01 = r0x * gr1x + r0y * gr1y
                    s11 = r1x * gr1x + r1y * gr1y
                    b1 = r1x * rhs0 + r1y * rhs1
                    dets = s00 * s11 - s01 * s01
                    scale1 = scale0 * ((r1x * r1x + r1y * r1y) * _absmax3(i00, i01, i11))
                    if not (fabs(dets) > DET_GUARD * (scale1 if scale1 > 1e-300 else 1e-300)):
                        act_j[i, 1] = -1
                        act_s[i, 1] = 0
                        dropped = 1
                    else:
                        lam0 = (s11 * b0 - s01 * b1) / dets
                        lam1 = (s00 * b1 - s01 * b0) / dets
                        # Two independent rows pin the step completely.
                        px = 0.0
                        py = 0.0
            if dropped:
                continue

            apmax = 0.0
            for j in range(nrows):
                ap = A[i, j, 0] * px + A[i, j, 1] * py
                apj[j] = ap
                if fabs(ap) > apmax:
                    apmax = fabs(ap)

            if apmax <= tol:
                if m == 0 or (lam0 >= -tol and (m < 2 or lam1 >= -tol)):
                    conv = 1
                    break
                # Drop the most negative multiplier; keep insertion order.
                worst = 0
                if m == 2 and lam1 < lam0:
                    worst = 1
                if worst == 1:
                    act_j[i, 1] = -1
                    act_s[i, 1] = 0
                else:
                    act_j[i, 0] = act_j[i, 1]
                    act_s[i, 0] = act_s[i, 1]
                    act_j[i, 1] = -1
                    act_s[i, 1] = 0
            else:
                bmin = INFINITY
                jb = -1
                for j in range(nrows):
                    ap = apj[j]
                    if ap > tol:
                        aL = A[i, j, 0] * lx + A[i, j, 1] * ly
                        beta = (ub[i, j] - aL) / ap
                    elif ap < -tol:
                        aL = A[i, j, 0] * lx + A[i, j, 1] * ly
                        beta = (lb[i, j] - aL) / ap
                    else:
                        continue
                    if beta < bmin:
                        bmin = beta
                        jb = j
                alpha = 1.0
                if bmin < alpha:
                    alpha = bmin
                if alpha < 0.0:
                    alpha = 0.0
                lx += alpha * px
                ly += alpha * py
                if jb >= 0 and bmin <= 1.0 and act_j[i, 0] != jb and act_j[i, 1] != jb:
                    sign = -1 if apj[jb] > 0.0 else 1
                    if act_j[i, 0] < 0:
                        act_j[i, 0] = jb
                        act_s[i, 0] = <cnp.int8_t> sign
                    elif act_j[i, 1] < 0:
                        act_j[i, 1] = jb
                        act_s[i, 1] = <cnp.int8_t> sign

        L[i, 0] = lx
        L[i, 1] = ly
        iters[i] = it
        converged[i] = conv

    return (
        L,
        iters,
        np.asarray(converged, dtype=bool),
        status,
        act_j,
        act_s,
    )
