"""One-level hierarchical refinement with twin-triangle hanging nodes.

Flagged background triangles are quadrisected into four similar children.
An unrefined cell next to a refined one receives the shared edge's midpoint
as a hanging node and becomes a twin triangle.  Two rules are enforced by
flag propagation: adjacent leaves differ by at most one level, and no
unrefined cell may carry more than one hanging node (it is refined instead).

Transfer is exactly conservative: prolongation evaluates the parent's
limited linear reconstruction at the child centroids (the mean of a linear
function over a triangle), coarsening takes the area-weighted child mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import reconstruction
from .mesh import Mesh, MeshError, build_mesh
from .physics import is_admissible
from .reconstruction import ILR


@dataclass
class AdaptiveMesh:
    """A background triangulation plus its current one-level refinement."""

    background: Mesh
    refined: np.ndarray      # (nb,) bool
    periodic: Optional[dict]
    leaf: Mesh
    leaf_parent: np.ndarray  # (nl,) background cell of each leaf
    leaf_child: np.ndarray   # (nl,) child index 0..3, or -1 for whole cells

    @classmethod
    def from_background(cls, mesh: Mesh, periodic: Optional[dict] = None):
        if mesh.is_twin.any():
            raise MeshError("background mesh must be purely triangular")
        refined = np.zeros(mesh.num_cells, dtype=bool)
        leaf, parent, child = _build_leaf(mesh, refined, periodic)
        return cls(mesh, refined, periodic, leaf, parent, child)

    @property
    def max_level(self) -> int:
        return int(self.refined.any())


def _boundary_spec(mesh: Mesh) -> dict:
    spec = {}
    for e in range(mesh.num_edges):
        if mesh.edge_tag[e] == 0:
            continue
        if mesh.edge_cells[e, 1] >= 0 and mesh.edge_partner[e] < 0:
            continue
        va, vb = (int(v) for v in mesh.edge_vertices[e])
        spec[(va, vb)] = mesh.tag_names[mesh.edge_tag[e]]
    return spec


def _build_leaf(bg: Mesh, refined: np.ndarray, periodic):
    """Assemble the leaf mesh for a given refined set."""
    # A background edge is split when any incident cell is refined.
    split = np.zeros(bg.num_edges, dtype=bool)
    for pos in range(2):
        cells = bg.edge_cells[:, pos]
        ok = cells >= 0
        split[ok] |= refined[cells[ok]]
    if periodic is not None and (split & (bg.edge_partner >= 0)).any():
        raise MeshError("refining cells on a periodic boundary is not supported")

    nv = bg.num_vertices
    split_ids = np.nonzero(split)[0]
    mid_vertex = np.full(bg.num_edges, -1, dtype=np.int64)
    mid_vertex[split_ids] = nv + np.arange(split_ids.size)
    vertices = np.vstack([bg.vertices, bg.edge_midpoint[split_ids]])

    cells = []
    parent = []
    child = []
    regions = []
    for ci in range(bg.num_cells):
        v = bg.cell_vertices[ci, :3]
        e = bg.side_edge[ci, :3]  # side k runs v[k] -> v[(k+1)%3]
        if refined[ci]:
            m = mid_vertex[e]
            quads = (
                (v[0], m[0], m[2]),
                (m[0], v[1], m[1]),
                (m[2], m[1], v[2]),
                (m[0], m[1], m[2]),
            )
            for k, tri in enumerate(quads):
                cells.append(tri)
                parent.append(ci)
                child.append(k)
                regions.append(int(bg.cell_region[ci]))
        else:
            outline = []
            for k in range(3):
                outline.append(int(v[k]))
                if split[e[k]]:
                    outline.append(int(mid_vertex[e[k]]))
            if len(outline) > 4:
                raise MeshError(
                    f"cell {ci} has {len(outline) - 3} hanging nodes "
                    "(propagation failed)"
                )
            cells.append(tuple(outline))
            parent.append(ci)
            child.append(-1)
            regions.append(int(bg.cell_region[ci]))

    edge_of = {}
    for e in range(bg.num_edges):
        a, b = (int(x) for x in bg.edge_vertices[e])
        edge_of[(min(a, b), max(a, b))] = e
    spec = {}
    for (va, vb), tag in _boundary_spec(bg).items():
        e = edge_of[(min(va, vb), max(va, vb))]
        if split[e]:
            m = int(mid_vertex[e])
            spec[(va, m)] = tag
            spec[(m, vb)] = tag
        else:
            spec[(va, vb)] = tag

    leaf = build_mesh(
        vertices, cells, spec, periodic=periodic, cell_regions=regions
    )
    return leaf, np.asarray(parent, dtype=np.int64), np.asarray(child, dtype=np.int64)


def flag_cells(
    mesh: Mesh, conservative: np.ndarray, threshold: float, gamma: float = 1.4
) -> np.ndarray:
    """Pressure-jump refinement flags: +1 refine, 0 keep, -1 coarsen.

    The indicator is the largest relative pressure jump over the cell's
    interior edges; cells above the threshold refine, cells below a quarter
    of it may coarsen (hysteresis band in between).
    """
    U = np.asarray(conservative, dtype=float)
    rho = U[:, 0]
    p = (gamma - 1.0) * (
        U[:, 3] - 0.5 * (U[:, 1] ** 2 + U[:, 2] ** 2) / rho
    )
    recon = reconstruction.reconstruct(mesh, p, ILR)
    fe = mesh.flux_edges
    eL, eR = mesh.edge_cells[fe, 0], mesh.edge_cells[fe, 1]
    sL, sR = mesh.edge_slots[fe, 0], mesh.edge_slots[fe, 1]
    inner = eR >= 0
    pL = recon.traces[eL[inner], sL[inner]]
    pR = recon.traces[eR[inner], sR[inner]]
    jump = np.abs(pL - pR) / np.maximum(np.minimum(pL, pR), 1e-300)
    ind = np.zeros(mesh.num_cells)
    np.maximum.at(ind, eL[inner], jump)
    np.maximum.at(ind, eR[inner], jump)
    flags = np.zeros(mesh.num_cells, dtype=np.int8)
    with np.errstate(invalid="ignore"):
        flags[ind > threshold] = 1
        flags[ind < 0.25 * threshold] = -1
    return flags


def _propagate(bg: Mesh, refined: np.ndarray) -> np.ndarray:
    """Refine until no unrefined cell has two or more refined neighbors."""
    refined = refined.copy()
    nbr = bg.side_neighbor[:, :3]
    has = nbr >= 0
    while True:
        counts = (refined[np.maximum(nbr, 0)] & has).sum(axis=1)
        force = (~refined) & (counts >= 2)
        if not force.any():
            return refined
        refined |= force


def adapt(
    amesh: AdaptiveMesh,
    fields,
    flags: np.ndarray,
    *,
    gamma: Optional[float] = None,
    method: str = ILR,
):
    """Apply refinement flags and transfer the cell averages.

    ``fields`` is (nl,) for a scalar or (nl, 4) for conservative Euler data
    (pass ``gamma`` to re-check admissibility after prolongation; children
    that would leave the admissible set fall back to the parent average).
    Returns (new AdaptiveMesh, new fields); the same objects come back when
    the refined set does not change.
    """
    bg = amesh.background
    flags = np.asarray(flags)
    fields = np.asarray(fields, dtype=float)
    scalar = fields.ndim == 1
    vals = fields[:, None] if scalar else fields

    want = amesh.refined.copy()
    whole = amesh.leaf_child < 0
    want[amesh.leaf_parent[whole & (flags == 1)]] = True
    want = _propagate(bg, want)

    # Coarsen a parent only when all four children agree and the result
    # would not end up with two hanging nodes.
    children_flag = np.zeros((bg.num_cells, 4), dtype=np.int8)
    kids = ~whole
    children_flag[amesh.leaf_parent[kids], amesh.leaf_child[kids]] = flags[kids]
    candidates = amesh.refined & (children_flag == -1).all(axis=1)
    nbr = bg.side_neighbor[:, :3]
    has = nbr >= 0
    changed = True
    while changed:
        changed = False
        for ci in np.nonzero(candidates & want)[0]:
            trial = want.copy()
            trial[ci] = False
            counts = (trial[np.maximum(nbr[ci], 0)] & has[ci]).sum()
            if counts <= 1:
                want[ci] = False
                changed = True

    if np.array_equal(want, amesh.refined):
        return amesh, fields

    leaf, parent, child = _build_leaf(bg, want, amesh.periodic)

    # Gather old values per background cell.
    old_whole = np.zeros((bg.num_cells, vals.shape[1]))
    old_kids = np.zeros((bg.num_cells, 4, vals.shape[1]))
    old_whole[amesh.leaf_parent[whole]] = vals[whole]
    old_kids[amesh.leaf_parent[kids], amesh.leaf_child[kids]] = vals[kids]

    # Prolongation data: limited gradients on the old leaf mesh.
    newly = want & ~amesh.refined
    leaf_of_bg = np.full(bg.num_cells, -1, dtype=np.int64)
    leaf_of_bg[amesh.leaf_parent[whole]] = np.nonzero(whole)[0]
    if newly.any():
        grads = np.stack(
            [
                reconstruction.reconstruct(amesh.leaf, vals[:, k], method).gradients
                for k in range(vals.shape[1])
            ],
            axis=-1,
        )  # (nl, 2, ncomp)

    old_child_area = np.zeros((bg.num_cells, 4))
    old_child_area[amesh.leaf_parent[kids], amesh.leaf_child[kids]] = amesh.leaf.area[
        kids
    ]

    out = np.empty((leaf.num_cells, vals.shape[1]))
    was_refined = amesh.refined[parent]
    k = child

    copy_whole = (k < 0) & ~was_refined
    out[copy_whole] = old_whole[parent[copy_whole]]

    coarsen = (k < 0) & was_refined
    if coarsen.any():
        ci = parent[coarsen]
        w = old_child_area[ci]
        out[coarsen] = (w[:, :, None] * old_kids[ci]).sum(axis=1) / w.sum(
            axis=1, keepdims=True
        )

    copy_kid = (k >= 0) & was_refined
    out[copy_kid] = old_kids[parent[copy_kid], k[copy_kid]]

    prolong = (k >= 0) & ~was_refined
    if prolong.any():
        ci = parent[prolong]
        ol = leaf_of_bg[ci]
        d = leaf.centroid[prolong] - amesh.leaf.centroid[ol]
        out[prolong] = old_whole[ci] + np.einsum("nj,njc->nc", d, grads[ol])
        if gamma is not None and vals.shape[1] == 4:
            bad = np.zeros(leaf.num_cells, dtype=bool)
            bad[prolong] = ~is_admissible(out[prolong], gamma)
            if bad.any():
                for cb in np.unique(parent[bad]):
                    out[parent == cb] = old_whole[cb]

    new_fields = out[:, 0] if scalar else out
    return (
        AdaptiveMesh(bg, want, amesh.periodic, leaf, parent, child),
        new_fields,
    )
