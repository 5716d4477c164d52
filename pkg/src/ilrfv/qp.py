"""Active-set solver for the 2-unknown double-inequality constrained QP

    min  1/2 L^T G L + c^T L
    s.t. lower <= A L <= upper,

with G a 2x2 SPD matrix and lower <= 0 <= upper, so L = 0 is always
feasible.  Iterates stay feasible and the objective never increases.  A
constraint may be active on one side at a time, tracked by an indicator
in {-1, 0, +1} (+1: lower side active, -1: upper side active).

This module is the readable single-problem reference; the batched kernels
in ``ilrfv._kernels`` implement the same algorithm over all mesh cells at
once and are cross-checked against it in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EPS = 1e-12
MAX_ITERATIONS = 6

# G is treated as singular when det(G) falls below this times ||G||_F^2.
DET_GUARD = 1e-14


class DegenerateActiveSetError(Exception):
    """The active-set KKT system is numerically rank deficient."""


@dataclass
class QPProblem:
    """Problem data; ``u0_scale`` is the reference magnitude used to make
    all solver tolerances scale invariant."""

    G: np.ndarray          # (2, 2) SPD
    c: np.ndarray          # (2,)
    A: np.ndarray          # (J, 2) constraint rows
    lower: np.ndarray      # (J,), <= 0
    upper: np.ndarray      # (J,), >= 0
    u0_scale: float = field(default=0.0)

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, 2)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.u0_scale == 0.0:
            span = float((self.upper - self.lower).max(initial=0.0))
            self.u0_scale = max(span, 1e-300)

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]

    def objective(self, L: np.ndarray) -> float:
        L = np.asarray(L, dtype=float)
        return float(0.5 * L @ self.G @ L + self.c @ L)


@dataclass
class QPResult:
    L: np.ndarray
    iterations: int
    final_active_set: list[tuple[int, int]]   # (constraint index, +/-1)
    converged: bool


def _inv2(G: np.ndarray) -> np.ndarray:
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    norm2 = float((G * G).sum())
    if not (det >= DET_GUARD * norm2) or G[0, 0] <= 0.0:
        raise ValueError("G is not (numerically) symmetric positive definite")
    return np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]]) / det


def equality_subproblem(
    G: np.ndarray, c: np.ndarray, L_k: np.ndarray, M: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the equality-constrained step: minimize the local quadratic
    model subject to M p = 0.

    Returns the step p and the Lagrange multipliers of the active rows,
    obtained from (M G^-1 M^T) lam = M (L_k + G^-1 c) and
    G p = M^T lam - G L_k - c.
    """
    Ginv = _inv2(np.asarray(G, dtype=float))
    M = np.asarray(M, dtype=float).reshape(-1, 2)
    rhs_base = L_k + Ginv @ c
    if M.shape[0] == 0:
        return -rhs_base, np.zeros(0)
    S = M @ Ginv @ M.T
    scale = float((M * M).sum()) * float(np.abs(Ginv).max())
    if M.shape[0] == 1:
        det = S[0, 0]
    else:
        det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        scale = scale * scale
    if not (abs(det) > 1e-14 * max(scale, 1e-300)):
        raise DegenerateActiveSetError("active constraint normals are dependent")
    lam = np.linalg.solve(S, M @ rhs_base)
    if M.shape[0] == 2:
        # Two independent rows pin the step completely in two unknowns.
        return np.zeros(2), lam
    p = Ginv @ (M.T @ lam - c) - L_k
    # M p = 0 holds analytically; remove the roundoff component so the
    # active row can never masquerade as a blocking constraint.
    row = M[0]
    p = p - row * (row @ p) / (row @ row)
    return p, lam


def step_length(
    problem: QPProblem, L_k: np.ndarray, p_k: np.ndarray
) -> tuple[float, Optional[int], int]:
    """Largest step in [0, 1] along p_k keeping all constraints satisfied.

    Returns (alpha, blocking index or None, indicator sign for the blocking
    constraint).  The comparisons of a_j^T p against zero are relaxed by
    EPS * u0_scale; ties pick the smallest constraint index.
    """
    a_p = problem.A @ p_k
    a_L = problem.A @ L_k
    tol = EPS * problem.u0_scale
    beta = np.full(problem.num_constraints, np.inf)
    pos = a_p > tol
    neg = a_p < -tol
    beta[pos] = (problem.upper[pos] - a_L[pos]) / a_p[pos]
    beta[neg] = (problem.lower[neg] - a_L[neg]) / a_p[neg]
    j = int(np.argmin(beta)) if beta.size else 0
    if beta.size == 0 or beta[j] > 1.0:
        return 1.0, None, 0
    alpha = max(float(beta[j]), 0.0)
    return alpha, j, -int(np.sign(a_p[j]))


def solve_qp(
    problem: QPProblem,
    max_iterations: int = MAX_ITERATIONS,
    eps: float = EPS,
) -> QPResult:
    """Solve the double-inequality QP by the active-set method.

    Starts from the feasible point L = 0 with an empty active set.  On a
    singular active-set system the most recently added constraint is
    dropped and iteration continues.  If the iteration cap is reached the
    best (still feasible) iterate is returned with ``converged=False``.
    """
    L = np.zeros(2)
    delta = np.zeros(problem.num_constraints, dtype=int)
    added: list[int] = []   # active constraints in order of insertion
    tol = eps * problem.u0_scale
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        active = [j for j in added if delta[j] != 0]
        M = problem.A[active] * np.array([delta[j] for j in active])[:, None] \
            if active else np.zeros((0, 2))
        try:
            p, lam = equality_subproblem(problem.G, problem.c, L, M)
        except DegenerateActiveSetError:
            delta[added.pop()] = 0
            continue
        if np.max(np.abs(problem.A @ p), initial=0.0) <= tol:
            if len(active) == 0 or lam.min(initial=0.0) >= -tol:
                return QPResult(
                    L=L,
                    iterations=iterations,
                    final_active_set=[(j, int(delta[j])) for j in active],
                    converged=True,
                )
            worst = active[int(np.argmin(lam))]
            delta[worst] = 0
            added.remove(worst)
        else:
            alpha, j, sign = step_length(problem, L, p)
            L = L + alpha * p
            if j is not None and delta[j] == 0:
                delta[j] = sign
                added.append(j)
    return QPResult(
        L=L,
        iterations=iterations,
        final_active_set=[(j, int(delta[j])) for j in added if delta[j] != 0],
        converged=False,
    )
