"""Semi-discrete residual, forward-Euler / SSP-RK2 stepping, and the
time-step controller (CFL bounds, positivity membership checks, backoff).

The semi-discrete rate of change of a cell average is

    du0/dt = -(1/|T0|) sum_j |e_j| F(u_j^-, u_j^+; n_j)   (+ source terms),

with one flux evaluation per unique edge, negated for the neighbor, so the
scheme is discretely conservative by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import physics, reconstruction
from .mesh import Mesh
from .physics import GAMMA_DEFAULT, HLLC, LLF, UPWIND
from .qp import MAX_ITERATIONS
from .reconstruction import ILR, PositivityError

SCALAR = "scalar"
EULER = "euler"
EULER_AXISYMMETRIC = "euler-axisymmetric"


class SolverAbort(Exception):
    """The step controller ran out of backoff retries."""


# ---------------------------------------------------------------------------
# Boundary conditions (per boundary tag)


@dataclass
class ScalarDirichlet:
    """Exterior scalar value imposed at boundary edge midpoints."""

    value: Union[float, Callable[[np.ndarray, float], np.ndarray]]

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        if callable(self.value):
            return np.asarray(self.value(points, t), dtype=float)
        return np.full(points.shape[0], float(self.value))


class ScalarOutflow:
    """Copy the interior trace (zero-gradient exterior)."""


class EulerWall:
    """Reflective wall / symmetry plane: mirror the interior trace."""


class EulerOutflow:
    """Copy the interior trace."""


@dataclass
class EulerInflow:
    """Prescribed exterior state (conservative 4-vector or callable)."""

    state: Union[np.ndarray, Callable[[np.ndarray, float], np.ndarray]]

    def __call__(self, points: np.ndarray, t: float) -> np.ndarray:
        if callable(self.state):
            return np.asarray(self.state(points, t), dtype=float)
        return np.broadcast_to(
            np.asarray(self.state, dtype=float), (points.shape[0], 4)
        ).copy()


@dataclass
class TimeStepPolicy:
    """CFL and positivity parameters.

    ``cfl_mode`` selects the scalar bound: "conventional" uses
    cfl * h / max|v.n|, "strict" uses the provable maximum-principle bound
    cfl * h / (12 max|v.n|).  Euler steps use a dt <= beta h / 2 and the
    axisymmetric system a dt <= beta min(h/4, 3 r_min / gamma).
    """

    cfl_number: float = 0.3
    beta: float = 1.0 / 3.0
    fixed_dt: Optional[float] = None
    positivity_backoff_factor: float = 0.5
    max_backoffs: int = 10
    cfl_mode: str = "conventional"

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.cfl_number <= 0.0:
            raise ValueError("cfl_number must be positive")
        if self.cfl_mode not in ("conventional", "strict"):
            raise ValueError(f"unknown cfl_mode {self.cfl_mode!r}")


@dataclass
class StepInfo:
    dt: float
    backoffs: int = 0
    qp_iteration_counts: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.int64)
    )


def euler_forward_step(u, t: float, dt: float, rhs) -> np.ndarray:
    """u + dt * rhs(u, t)."""
    return u + dt * rhs(u, t)


def ssp_rk2_step(u, t: float, dt: float, rhs) -> np.ndarray:
    """Two forward-Euler stages averaged: the second-order SSP scheme."""
    u_star = u + dt * rhs(u, t)
    return 0.5 * u + 0.5 * (u_star + dt * rhs(u_star, t + dt))


class Scheme:
    """Spatial discretization bound to one mesh, equation, and flux.

    ``kind`` is one of "scalar", "euler", "euler-axisymmetric".  For scalar
    problems ``velocity`` is a constant 2-vector or a callable mapping
    midpoints (k, 2) to velocities (k, 2).  ``bcs`` maps boundary tag names
    to boundary-condition objects.
    """

    def __init__(
        self,
        mesh: Mesh,
        kind: str,
        *,
        velocity=None,
        flux: str = UPWIND,
        method: str = ILR,
        bcs: Optional[dict] = None,
        policy: Optional[TimeStepPolicy] = None,
        gamma: float = GAMMA_DEFAULT,
        integrator: str = "ssp-rk2",
    ):
        if kind not in (SCALAR, EULER, EULER_AXISYMMETRIC):
            raise ValueError(f"unknown equation kind {kind!r}")
        self.mesh = mesh
        self.kind = kind
        self.flux = flux
        self.method = method
        self.gamma = gamma
        self.policy = policy or TimeStepPolicy()
        self.bcs = dict(bcs or {})
        self.integrator = integrator
        self.qp_histogram = np.zeros(MAX_ITERATIONS + 1, np.int64)
        self.recon_seconds = 0.0
        self._fortify_dt = None
        # Once a step needed the splitting fix, start subsequent steps with
        # it enabled: retrying a failed full step costs two extra residual
        # passes, and flows that trip it once tend to keep tripping it.
        self._fortify_sticky = False

        fe = mesh.flux_edges
        self._eL = mesh.edge_cells[fe, 0]
        self._eR = mesh.edge_cells[fe, 1]
        self._sL = mesh.edge_slots[fe, 0]
        self._sR = mesh.edge_slots[fe, 1]
        self._elen = mesh.edge_length[fe]
        self._emid = mesh.edge_midpoint[fe]
        self._enorm = mesh.edge_normal[fe]
        self._interior = self._eR >= 0
        self._inv_area = 1.0 / mesh.area
        self._bc_groups = {}
        for pos in np.nonzero(~self._interior)[0]:
            tag = mesh.tag_names[mesh.edge_tag[fe[pos]]]
            self._bc_groups.setdefault(tag, []).append(pos)
        for tag in self._bc_groups:
            if tag not in self.bcs:
                raise ValueError(f"no boundary condition for tag {tag!r}")
            self._bc_groups[tag] = np.asarray(self._bc_groups[tag], dtype=np.int64)

        # 3 w_j: the convex-splitting coefficients of the positivity check
        # (1 per leg, 1/2 per twin half-edge).
        self._split_coef = 3.0 * mesh.quad_weights
        self.h = float(mesh.inscribed.min())

        if kind == SCALAR:
            if velocity is None:
                raise ValueError("scalar problems need a velocity field")
            self.velocity = velocity
            vel = self._velocity_at(self._emid)
            self._edge_vn = (vel * self._enorm).sum(axis=1)
            self.sup_flux_derivative = float(np.abs(self._edge_vn).max(initial=0.0))
        else:
            side_r = mesh.side_midpoint[..., 0]
            extent = float(np.abs(mesh.vertices).max(initial=1.0))
            self._axis_tol = 1e-12 * max(extent, 1.0)
            valid = np.arange(4)[None, :] < mesh.nsides[:, None]
            off_axis = valid & (side_r > self._axis_tol)
            self.r_min = float(side_r[off_axis].min()) if off_axis.any() else np.inf

    def _velocity_at(self, points: np.ndarray) -> np.ndarray:
        if callable(self.velocity):
            return np.asarray(self.velocity(points), dtype=float)
        return np.broadcast_to(np.asarray(self.velocity, float), points.shape)

    # -- reconstruction ----------------------------------------------------

    def reconstruct(self, state):
        start = time.perf_counter()
        if self.kind == SCALAR:
            recon = reconstruction.reconstruct(self.mesh, state, self.method)
            its = recon.qp_iterations
        else:
            recon = reconstruction.reconstruct_euler(
                self.mesh, state, self.gamma, self.method
            )
            its = None
            if recon.rho.qp_iterations is not None:
                its = np.concatenate(
                    [f.qp_iterations for f in (recon.rho, recon.u, recon.v, recon.p)]
                )
        if its is not None:
            self.qp_histogram += np.bincount(
                np.minimum(its, len(self.qp_histogram) - 1),
                minlength=len(self.qp_histogram),
            )
        self.recon_seconds += time.perf_counter() - start
        return recon

    # -- residual ----------------------------------------------------------

    def residual(self, state, t: float = 0.0, recon=None):
        """Rate of change of every cell average at time t."""
        if self.kind == SCALAR:
            return self._residual_scalar(state, t, recon)
        return self._residual_euler(state, t, recon)

    def _residual_scalar(self, u, t, recon):
        if recon is None:
            recon = self.reconstruct(u)
        uL = recon.traces[self._eL, self._sL]
        uR = np.where(
            self._interior,
            recon.traces[np.maximum(self._eR, 0), np.maximum(self._sR, 0)],
            0.0,
        )
        for tag, pos in self._bc_groups.items():
            bc = self.bcs[tag]
            if isinstance(bc, ScalarDirichlet):
                uR[pos] = bc(self._emid[pos], t)
            elif isinstance(bc, ScalarOutflow):
                uR[pos] = uL[pos]
            else:
                raise TypeError(f"{type(bc).__name__} is not a scalar BC")
        f = self._edge_vn * np.where(self._edge_vn >= 0.0, uL, uR)
        return self._accumulate(f[:, None])[:, 0]

    def _ghost_states(self, UL, t):
        UR = np.where(self._interior[:, None], UL, 0.0)
        for tag, pos in self._bc_groups.items():
            bc = self.bcs[tag]
            if isinstance(bc, EulerWall):
                UR[pos] = physics.mirror_state(UL[pos], self._enorm[pos])
            elif isinstance(bc, EulerInflow):
                UR[pos] = bc(self._emid[pos], t)
            elif isinstance(bc, EulerOutflow):
                UR[pos] = UL[pos]
            else:
                raise TypeError(f"{type(bc).__name__} is not an Euler BC")
        return UR

    def _residual_euler(self, U, t, recon):
        if recon is None:
            recon = self.reconstruct(U)
        tr = recon.conservative_traces(self.gamma)
        if self._fortify_dt is not None:
            # Retry mode: restore the positivity-splitting hypothesis by
            # flattening the reconstruction of every violating cell.
            a = physics.max_wave_speed(tr, self.gamma)
            bad = self._split_violators(U, recon, tr, self._fortify_dt, a)
            if bad.any():
                reconstruction.flatten_cells(recon, bad)
                tr = recon.conservative_traces(self.gamma)
        UL = tr[self._eL, self._sL]
        UR = tr[np.maximum(self._eR, 0), np.maximum(self._sR, 0)]
        UR[~self._interior] = 0.0
        UR = np.where(self._interior[:, None], UR, self._ghost_states(UL, t))
        if self.flux == LLF:
            a = max(
                physics.max_wave_speed(tr, self.gamma),
                physics.max_wave_speed(UR[~self._interior], self.gamma)
                if (~self._interior).any()
                else 0.0,
            )
            f = physics.llf_flux(UL, UR, self._enorm, a, self.gamma)
        elif self.flux == HLLC:
            f = physics.hllc_flux(UL, UR, self._enorm, self.gamma)
        else:
            raise ValueError(f"flux {self.flux!r} is not an Euler flux")
        rate = self._accumulate(f)
        if self.kind == EULER_AXISYMMETRIC:
            rate += self._axisymmetric_source(recon)
        return rate

    def _accumulate(self, f: np.ndarray) -> np.ndarray:
        nc = self.mesh.num_cells
        w = f * self._elen[:, None]
        rate = np.empty((nc, f.shape[1]))
        inner = self._interior
        for k in range(f.shape[1]):
            rate[:, k] = np.bincount(
                self._eL, weights=-w[:, k], minlength=nc
            ) + np.bincount(
                self._eR[inner], weights=w[inner, k], minlength=nc
            )
        return rate * self._inv_area[:, None]

    def _axisymmetric_source(self, recon) -> np.ndarray:
        """Midpoint-quadrature source: sum_j w_j (0, p(z_j), 0, 0).

        p is the physical pressure, the radius-weighted trace pressure over
        the midpoint radius.  Midpoints on the axis use the cell-average
        pressure instead (one-sided evaluation).
        """
        mesh = self.mesh
        r_side = mesh.side_midpoint[..., 0]
        p_tr = recon.p.traces
        p_cell = recon.p.values / np.maximum(mesh.centroid[:, 0], self._axis_tol)
        safe = r_side > self._axis_tol
        p_phys = np.where(
            safe, p_tr / np.where(safe, r_side, 1.0), p_cell[:, None]
        )
        src = np.zeros((mesh.num_cells, 4))
        src[:, 1] = (mesh.quad_weights * p_phys).sum(axis=1)
        return src

    # -- time-step control ---------------------------------------------------

    def compute_dt(self, state, t: float = 0.0, recon=None):
        """Time step from the active CFL policy plus, for Euler problems,
        the positivity membership conditions (with dt-halving backoff).

        Returns (dt, recon, backoffs)."""
        pol = self.policy
        if self.kind == SCALAR:
            if pol.fixed_dt is not None:
                return pol.fixed_dt, recon, 0
            sup = self.sup_flux_derivative
            if sup <= 0.0:
                raise SolverAbort("zero wave speed and no fixed_dt")
            if pol.cfl_mode == "strict":
                return pol.cfl_number * self.h / (12.0 * sup), recon, 0
            return pol.cfl_number * self.h / sup, recon, 0

        if recon is None:
            recon = self.reconstruct(state)
        tr = recon.conservative_traces(self.gamma)
        a = physics.max_wave_speed(tr, self.gamma)
        if a <= 0.0:
            raise SolverAbort("zero wave speed and no fixed_dt")
        if self.kind == EULER:
            ref = self.h / 2.0
        else:
            ref = min(self.h / 4.0, 3.0 * self.r_min / self.gamma)
        dt = pol.beta * ref / a
        if pol.fixed_dt is not None:
            dt = min(dt, pol.fixed_dt)
        return dt, recon, 0

    def _split_violators(self, state, recon, tr, dt, a) -> np.ndarray:
        """Cells whose traces break the convex-splitting positivity
        hypothesis: u0 - kappa_i * (split-weighted trace sum) must stay in
        the closed admissible cone, with kappa_i = 2 a dt / d_i the exact
        per-cell flux coefficient (plus the source-splitting variant for the
        axisymmetric system)."""
        kappa = (2.0 * a * dt) / self.mesh.inscribed
        split_sum = np.einsum("nk,nkc->nc", self._split_coef, tr)
        if self.kind == EULER:
            probe = state - kappa[:, None] * split_sum
            return ~physics.in_admissible_closure(probe)
        probe = state - 1.5 * kappa[:, None] * split_sum
        bad = ~physics.in_admissible_closure(probe)
        # Source part: trace + tau * (0, p, 0, 0) per quadrature point.
        mesh = self.mesh
        tau = mesh.inscribed / (3.0 * a)
        r_side = mesh.side_midpoint[..., 0]
        p_cell = recon.p.values / np.maximum(mesh.centroid[:, 0], self._axis_tol)
        safe = r_side > self._axis_tol
        p_phys = np.where(safe, recon.p.traces / np.where(safe, r_side, 1.0),
                          p_cell[:, None])
        probe2 = tr.copy()
        probe2[..., 1] += tau[:, None] * p_phys
        valid = np.arange(4)[None, :] < mesh.nsides[:, None]
        bad |= (~physics.in_admissible_closure(probe2) & valid).any(axis=1)
        return bad

    # -- stepping ------------------------------------------------------------

    def step_forward_euler(self, state, t, dt, recon=None, stage_hook=None):
        rate = self.residual(state, t, recon)
        out = state + dt * rate
        self._check_state(out)
        if stage_hook is not None:
            stage_hook(state, out, dt)
        return out

    def step_ssp_rk2(self, state, t, dt, recon=None, stage_hook=None):
        star = self.step_forward_euler(state, t, dt, recon, stage_hook)
        full = self.step_forward_euler(star, t + dt, dt, None, stage_hook)
        return 0.5 * state + 0.5 * full

    def _check_state(self, state):
        if self.kind == SCALAR:
            if not np.isfinite(state).all():
                raise SolverAbort("scalar state is no longer finite")
        else:
            physics.require_admissible(state, self.gamma, "cell average")

    def advance(self, state, t: float, dt_cap: Optional[float] = None):
        """One full time step with positivity protection.

        If a stage loses positivity the step is retried with the splitting
        hypothesis enforced (violating cells flattened); only if that still
        fails is dt halved, up to the backoff limit.  Returns
        (new_state, StepInfo)."""
        recon = self.reconstruct(state)
        dt, recon, backoffs = self.compute_dt(state, t, recon)
        if dt_cap is not None and dt_cap < dt:
            dt = dt_cap
        stepper = (
            self.step_ssp_rk2 if self.integrator == "ssp-rk2" else self.step_forward_euler
        )
        try:
            if self._fortify_sticky:
                self._fortify_dt = dt
            while True:
                try:
                    new_state = stepper(state, t, dt, recon)
                    return new_state, StepInfo(dt=dt, backoffs=backoffs)
                except PositivityError:
                    if self._fortify_dt is None:
                        self._fortify_dt = dt
                        self._fortify_sticky = True
                        continue
                    backoffs += 1
                    if backoffs > self.policy.max_backoffs:
                        raise SolverAbort(
                            f"positivity backoff exhausted at t={t:.6g}"
                        ) from None
                    dt *= self.policy.positivity_backoff_factor
                    self._fortify_dt = dt
        finally:
            self._fortify_dt = None

    # -- diagnostics ---------------------------------------------------------

    def totals(self, state) -> np.ndarray:
        """Mesh integrals of the conserved quantities."""
        s = np.atleast_2d(np.asarray(state, dtype=float).T).T
        return self.mesh.area @ s

    def max_principle_slack(self, u_pre, u_post, t: float = 0.0) -> float:
        """Largest excursion of the new averages outside the stencil range.

        Interior cells use the edge-neighbor stencil of the maximum
        principle; boundary cells extend it with their Moore values and any
        imposed Dirichlet midpoint values (their reconstruction bounds).
        Negative means the principle holds strictly.
        """
        mesh = self.mesh
        has = mesh.side_neighbor >= 0
        nbr = np.maximum(mesh.side_neighbor, 0)
        nb_vals = np.where(has, u_pre[nbr], u_pre[:, None])
        lo = np.minimum(u_pre, nb_vals.min(axis=1))
        hi = np.maximum(u_pre, nb_vals.max(axis=1))
        bnd = mesh.is_boundary_cell
        if bnd.any():
            seg_min = np.minimum.reduceat(u_pre[mesh.moore_cells], mesh.moore_indptr[:-1])
            seg_max = np.maximum.reduceat(u_pre[mesh.moore_cells], mesh.moore_indptr[:-1])
            lo[bnd] = np.minimum(lo[bnd], seg_min[bnd])
            hi[bnd] = np.maximum(hi[bnd], seg_max[bnd])
        for tag, pos in self._bc_groups.items():
            bc = self.bcs[tag]
            if isinstance(bc, ScalarDirichlet):
                vals = bc(self._emid[pos], t)
                cells = self._eL[pos]
                np.minimum.at(lo, cells, vals)
                np.maximum.at(hi, cells, vals)
        return float(np.maximum(u_post - hi, lo - u_post).max())
