"""Per-cell limited gradients and edge-midpoint trace values.

For every cell the gradient minimizes the squared misfit against neighbor
averages subject to double bounds on the edge-midpoint values: the midpoint
value must stay between the cell average and the neighbor average (QP-limited
reconstruction).  Interior cells use the edge neighbors; cells touching the
physical boundary use the vertex-sharing (Moore) stencil and stencil-wide
bounds.  Barth limiting and the raw least-squares gradient are available as
comparison methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .mesh import Mesh
from .qp import DET_GUARD, EPS, MAX_ITERATIONS, QPProblem

ILR = "ilr"
BARTH = "barth"
UNLIMITED = "unlimited"
METHODS = (ILR, BARTH, UNLIMITED)


class DegenerateStencilError(Exception):
    """Neighbor centroids do not span the plane for some cell."""


class PositivityError(Exception):
    """A state left the admissible set (positive density and pressure)."""


@dataclass
class ReconstructedField:
    """Gradient and per-side midpoint traces of one scalar quantity.

    ``traces[i, k] = values[i] + gradient[i] . (z_k - centroid_i)`` for side
    k of cell i; padding slots of triangles repeat the cell value.
    """

    method: str
    values: np.ndarray        # (nc,) the cell averages that were limited
    gradients: np.ndarray     # (nc, 2)
    traces: np.ndarray        # (nc, 4)
    qp_iterations: Optional[np.ndarray] = None   # (nc,) int, ILR only
    qp_converged: Optional[np.ndarray] = None    # (nc,) bool, ILR only


class _Workspace:
    """Mesh-derived arrays shared by every reconstruction call."""

    def __init__(self, mesh: Mesh):
        nc = mesh.num_cells
        valid = np.arange(4)[None, :] < mesh.nsides[:, None]
        self.valid = valid
        self.A = np.where(
            valid[:, :, None], mesh.side_midpoint - mesh.centroid[:, None, :], 0.0
        )
        nbr = mesh.side_neighbor.copy()
        self.has_nbr = (nbr >= 0) & valid
        self.nbr = np.where(self.has_nbr, nbr, 0)
        self.r = np.where(
            self.has_nbr[:, :, None],
            np.nan_to_num(mesh.side_neighbor_centroid) - mesh.centroid[:, None, :],
            0.0,
        )

        self.boundary = mesh.is_boundary_cell
        self.interior = ~self.boundary

        G = np.einsum("nki,nkj->nij", self.r, self.r)

        # Moore stencils, restricted to the boundary cells that use them.
        bsel = np.nonzero(self.boundary)[0]
        self.bsel = bsel
        nb = bsel.size
        counts = np.diff(mesh.moore_indptr)
        if nb:
            if counts[bsel].min(initial=1) == 0:
                bad = int(bsel[np.nonzero(counts[bsel] == 0)[0][0]])
                raise DegenerateStencilError(
                    f"boundary cell {bad} has an empty Moore stencil"
                )
            chunks = [
                np.arange(mesh.moore_indptr[c], mesh.moore_indptr[c + 1])
                for c in bsel
            ]
            take = np.concatenate(chunks)
            self.b_cells = mesh.moore_cells[take]
            self.b_rows = np.repeat(np.arange(nb), counts[bsel])
            self.b_cellids = bsel[self.b_rows]
            self.b_indptr = np.concatenate(([0], np.cumsum(counts[bsel])))
            self.b_r = mesh.moore_centroid[take] - mesh.centroid[self.b_cellids]
            Gb0 = np.bincount(
                self.b_rows, weights=self.b_r[:, 0] * self.b_r[:, 0], minlength=nb
            )
            Gb1 = np.bincount(
                self.b_rows, weights=self.b_r[:, 0] * self.b_r[:, 1], minlength=nb
            )
            Gb2 = np.bincount(
                self.b_rows, weights=self.b_r[:, 1] * self.b_r[:, 1], minlength=nb
            )
            G[bsel, 0, 0] = Gb0
            G[bsel, 0, 1] = Gb1
            G[bsel, 1, 0] = Gb1
            G[bsel, 1, 1] = Gb2

        det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] ** 2
        norm2 = (G * G).sum(axis=(1, 2))
        bad = ~(det >= DET_GUARD * norm2)
        if bad.any():
            raise DegenerateStencilError(
                f"stencil centroids of cell {int(np.nonzero(bad)[0][0])} "
                "are collinear (G is singular)"
            )
        self.G = G
        self.Ginv = np.empty_like(G)
        self.Ginv[:, 0, 0] = G[:, 1, 1] / det
        self.Ginv[:, 1, 1] = G[:, 0, 0] / det
        self.Ginv[:, 0, 1] = -G[:, 0, 1] / det
        self.Ginv[:, 1, 0] = -G[:, 1, 0] / det
        self._tiled: dict[int, tuple] = {}

    def tiled(self, m: int) -> tuple:
        """Contiguous m-fold copies of G and A for the batched kernel."""
        if m not in self._tiled:
            self._tiled[m] = (
                np.ascontiguousarray(
                    np.broadcast_to(self.G, (m,) + self.G.shape)
                ).reshape(-1, 2, 2),
                np.ascontiguousarray(
                    np.broadcast_to(self.A, (m,) + self.A.shape)
                ).reshape(-1, 4, 2),
            )
        return self._tiled[m]


def _workspace(mesh: Mesh) -> _Workspace:
    ws = getattr(mesh, "_recon_workspace", None)
    if ws is None:
        ws = _Workspace(mesh)
        object.__setattr__(mesh, "_recon_workspace", ws)
    return ws


def _assemble(mesh: Mesh, values: np.ndarray):
    """Vectorized right-hand sides and bounds for every cell's QP.

    ``values`` may carry several fields stacked along a leading axis
    ((m, nc) instead of (nc,)); outputs then gain the same leading axis.
    """
    ws = _workspace(mesh)
    u = np.asarray(values, dtype=float)
    du = np.where(ws.has_nbr, u[..., :, None] - u[..., ws.nbr], 0.0)  # u0 - u_j
    c = np.einsum("...nk,nkj->...nj", du, ws.r)
    lower = np.where(ws.has_nbr, np.minimum(0.0, -du), 0.0)
    upper = np.where(ws.has_nbr, np.maximum(0.0, -du), 0.0)

    if ws.bsel.size:
        nb = ws.bsel.size
        u_b = u[..., ws.b_cellids]
        stencil = u[..., ws.b_cells]
        dum = u_b - stencil
        flat_du = dum.reshape(-1, dum.shape[-1])
        flat_c = c.reshape(-1, c.shape[-2], 2)
        for k in range(flat_du.shape[0]):
            cb0 = np.bincount(ws.b_rows, weights=flat_du[k] * ws.b_r[:, 0],
                              minlength=nb)
            cb1 = np.bincount(ws.b_rows, weights=flat_du[k] * ws.b_r[:, 1],
                              minlength=nb)
            flat_c[k, ws.bsel, 0] = cb0
            flat_c[k, ws.bsel, 1] = cb1
        seg_min = np.minimum.reduceat(stencil, ws.b_indptr[:-1], axis=-1)
        seg_max = np.maximum.reduceat(stencil, ws.b_indptr[:-1], axis=-1)
        u0_b = u[..., ws.bsel]
        wide_lo = np.minimum(0.0, seg_min - u0_b)
        wide_hi = np.maximum(0.0, seg_max - u0_b)
        valid_b = ws.valid[ws.bsel]
        lower[..., ws.bsel, :] = np.where(valid_b, wide_lo[..., :, None], 0.0)
        upper[..., ws.bsel, :] = np.where(valid_b, wide_hi[..., :, None], 0.0)
    return ws, c, lower, upper


def assemble_interior_qp(mesh: Mesh, values, cell_id: int) -> QPProblem:
    """The QP of one interior cell (edge-neighbor stencil and bounds)."""
    ws = _workspace(mesh)
    if not ws.has_nbr[cell_id, : mesh.nsides[cell_id]].all():
        raise DegenerateStencilError(
            f"cell {cell_id} has a boundary side; use assemble_boundary_qp"
        )
    _, c, lower, upper = _assemble(mesh, values)
    j = int(mesh.nsides[cell_id])
    return QPProblem(
        G=ws.G[cell_id],
        c=c[cell_id],
        A=ws.A[cell_id, :j],
        lower=lower[cell_id, :j],
        upper=upper[cell_id, :j],
    )


def assemble_boundary_qp(mesh: Mesh, values, cell_id: int) -> QPProblem:
    """The QP of a boundary cell (Moore stencil, stencil-wide bounds)."""
    if not mesh.is_boundary_cell[cell_id]:
        raise DegenerateStencilError(f"cell {cell_id} does not touch the boundary")
    ws = _workspace(mesh)
    _, c, lower, upper = _assemble(mesh, values)
    j = int(mesh.nsides[cell_id])
    return QPProblem(
        G=ws.G[cell_id],
        c=c[cell_id],
        A=ws.A[cell_id, :j],
        lower=lower[cell_id, :j],
        upper=upper[cell_id, :j],
    )


def _solve_fields(mesh: Mesh, u: np.ndarray, method: str):
    """Gradients/traces for one field (nc,) or a stack of fields (m, nc)."""
    ws, c, lower, upper = _assemble(mesh, u)
    stacked = u.ndim == 2
    iterations = None
    converged = None
    if method == UNLIMITED:
        gradients = -np.einsum("nij,...nj->...ni", ws.Ginv, c)
    elif method == BARTH:
        unlimited = -np.einsum("nij,...nj->...ni", ws.Ginv, c)
        x = np.einsum("nkj,...nj->...nk", ws.A, unlimited)
        safe = np.where(x == 0.0, 1.0, x)
        phi = np.where(
            x > upper, upper / safe, np.where(x < lower, lower / safe, 1.0)
        )
        phi = np.clip(phi.min(axis=-1), 0.0, 1.0)
        gradients = phi[..., None] * unlimited
    else:
        nc = mesh.num_cells
        m = u.shape[0] if stacked else 1
        G, A = ws.tiled(m)
        gradients, iterations, converged, status, _, _ = _kernels.solve_qp_batch(
            G,
            c.reshape(m * nc, 2),
            A,
            lower.reshape(m * nc, 4),
            upper.reshape(m * nc, 4),
            EPS,
            MAX_ITERATIONS,
        )
        if status.any():
            bad = int(np.nonzero(status)[0][0]) % nc
            raise DegenerateStencilError(
                f"stencil of cell {bad} produced a non-SPD normal matrix"
            )
        if stacked:
            gradients = gradients.reshape(m, nc, 2)
            iterations = iterations.reshape(m, nc)
            converged = converged.reshape(m, nc)
        else:
            gradients = gradients.reshape(nc, 2)
    traces = u[..., :, None] + np.einsum("nkj,...nj->...nk", ws.A, gradients)
    return gradients, traces, iterations, converged


def reconstruct(mesh: Mesh, values, method: str = ILR) -> ReconstructedField:
    """Limited gradient and midpoint traces of one cell-average field."""
    if method not in METHODS:
        raise ValueError(f"unknown reconstruction method {method!r}")
    u = np.asarray(values, dtype=float)
    gradients, traces, iterations, converged = _solve_fields(mesh, u, method)
    return ReconstructedField(
        method=method,
        values=u,
        gradients=gradients,
        traces=traces,
        qp_iterations=iterations,
        qp_converged=converged,
    )


@dataclass
class EulerReconstruction:
    """Componentwise primitive-variable reconstruction of an Euler field."""

    rho: ReconstructedField
    u: ReconstructedField
    v: ReconstructedField
    p: ReconstructedField

    def conservative_traces(self, gamma: float) -> np.ndarray:
        """Trace states in conservative variables, shape (nc, 4, 4)."""
        r, uu, vv, pp = (
            self.rho.traces,
            self.u.traces,
            self.v.traces,
            self.p.traces,
        )
        out = np.empty(r.shape + (4,))
        out[..., 0] = r
        out[..., 1] = r * uu
        out[..., 2] = r * vv
        out[..., 3] = pp / (gamma - 1.0) + 0.5 * r * (uu * uu + vv * vv)
        return out


def reconstruct_euler(
    mesh: Mesh, conservative, gamma: float = 1.4, method: str = ILR
) -> EulerReconstruction:
    """Reconstruct density, velocity and pressure of an Euler field.

    Cell averages must be admissible.  Bound constraints keep reconstructed
    densities and pressures positive for the QP-limited method; if rounding
    at an active bound ever produces a non-positive trace, that cell's
    gradient is dropped (traces fall back to the cell average).
    """
    U = np.asarray(conservative, dtype=float)
    rho = U[:, 0]
    mom_x, mom_y, E = U[:, 1], U[:, 2], U[:, 3]
    bad = rho <= 0.0
    if bad.any():
        raise PositivityError(
            f"cell {int(np.nonzero(bad)[0][0])} has non-positive density"
        )
    u = mom_x / rho
    v = mom_y / rho
    p = (gamma - 1.0) * (E - 0.5 * rho * (u * u + v * v))
    bad = p <= 0.0
    if bad.any():
        raise PositivityError(
            f"cell {int(np.nonzero(bad)[0][0])} has non-positive pressure"
        )

    stack = np.stack([rho, u, v, p])
    gradients, traces, iterations, converged = _solve_fields(mesh, stack, method)
    fields = EulerReconstruction(
        *(
            ReconstructedField(
                method=method,
                values=stack[k],
                gradients=gradients[k],
                traces=traces[k],
                qp_iterations=None if iterations is None else iterations[k],
                qp_converged=None if converged is None else converged[k],
            )
            for k in range(4)
        )
    )
    for comp in (fields.rho, fields.p):
        broken = (comp.traces <= 0.0).any(axis=1)
        if broken.any():
            comp.gradients[broken] = 0.0
            comp.traces[broken] = comp.values[broken, None]
    return fields


def flatten_cells(fields: EulerReconstruction, mask: np.ndarray, scale=0.0) -> None:
    """Scale the gradients of the masked cells toward zero (in place).

    With scale 0 the traces collapse to the cell averages, which always
    restores the positivity-splitting hypothesis of the Euler scheme.
    """
    for comp in (fields.rho, fields.u, fields.v, fields.p):
        comp.gradients[mask] *= scale
        comp.traces[mask] = comp.values[mask, None] + scale * (
            comp.traces[mask] - comp.values[mask, None]
        )
