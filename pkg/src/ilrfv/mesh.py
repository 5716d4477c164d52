"""Unstructured triangular meshes with twin-triangle (hanging node) cells.

A mesh is a flat, immutable collection of numpy arrays.  Cells are triangles
(3 sides) or twin triangles: a triangle whose long edge carries a hanging
node, treated as a quadrilateral with 4 sides.  For twin cells the two
collinear half-edges always occupy side slots 2 and 3, so the midpoint
quadrature weights are (1/3, 1/3) for the legs and (1/6, 1/6) for the halves.

Periodic boundaries are realised by pairing boundary edges under a
translation; paired edges behave like interior edges for flux and neighbor
queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Vertices closer than SNAP_REL * domain diameter are merged on construction.
SNAP_REL = 1e-10


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


@dataclass
class CellGeometry:
    """Geometry summary of a single cell."""

    centroid: np.ndarray
    area: float
    inscribed_diameter: float
    edge_count: int


@dataclass(frozen=True)
class Mesh:
    """Immutable 2D unstructured mesh of triangles and twin triangles.

    Side arrays have a fixed width of 4; triangle rows use only the first
    three slots (padding: index arrays -1, float arrays 0/NaN).  ``side_*``
    arrays are per (cell, local side); ``edge_*`` arrays are per unique edge.
    Periodic partner edges are merged: only the representative edge appears
    in ``flux_edges`` and both cells see each other as ordinary neighbors.
    """

    vertices: np.ndarray          # (nv, 2)
    cell_vertices: np.ndarray     # (nc, 4) int, -1 padded, CCW outline
    nsides: np.ndarray            # (nc,) int, 3 or 4
    is_twin: np.ndarray           # (nc,) bool
    cell_region: np.ndarray       # (nc,) int, tag from mesh file (0 default)

    centroid: np.ndarray          # (nc, 2)
    area: np.ndarray              # (nc,)
    perimeter: np.ndarray         # (nc,)
    inscribed: np.ndarray         # (nc,) 4*area/perimeter
    quad_weights: np.ndarray      # (nc, 4) midpoint-rule weights, 0 padded

    side_edge: np.ndarray         # (nc, 4) int edge id
    side_neighbor: np.ndarray     # (nc, 4) int cell id, -1 if none
    side_neighbor_centroid: np.ndarray  # (nc, 4, 2) translated for periodic
    side_midpoint: np.ndarray     # (nc, 4, 2)
    side_normal: np.ndarray       # (nc, 4, 2) outward unit normal
    side_length: np.ndarray       # (nc, 4)

    edge_vertices: np.ndarray     # (ne, 2) int
    edge_cells: np.ndarray        # (ne, 2) int (left, right), -1 if absent
    edge_slots: np.ndarray        # (ne, 2) int local side in (left, right)
    edge_length: np.ndarray       # (ne,)
    edge_midpoint: np.ndarray     # (ne, 2)
    edge_normal: np.ndarray       # (ne, 2) outward from the left cell
    edge_tag: np.ndarray          # (ne,) int index into tag_names
    tag_names: tuple              # tag strings; tag_names[0] == "interior"
    edge_partner: np.ndarray      # (ne,) int periodic partner edge, -1
    flux_edges: np.ndarray        # (nf,) int edges carrying a flux

    is_boundary_cell: np.ndarray  # (nc,) bool, touches a physical boundary
    moore_indptr: np.ndarray      # (nc+1,) CSR over all cells
    moore_cells: np.ndarray       # (nnz,) int
    moore_centroid: np.ndarray    # (nnz, 2) translated for periodic partners

    @property
    def num_cells(self) -> int:
        return self.area.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_length.shape[0]

    @property
    def domain_area(self) -> float:
        return float(self.area.sum())

    def cell_geometry(self, cell_id: int) -> CellGeometry:
        return CellGeometry(
            centroid=self.centroid[cell_id].copy(),
            area=float(self.area[cell_id]),
            inscribed_diameter=float(self.inscribed[cell_id]),
            edge_count=int(self.nsides[cell_id]),
        )

    def boundary_edges(self, tag: Optional[str] = None) -> np.ndarray:
        """Edge ids on the physical boundary, optionally restricted to a tag."""
        mask = (self.edge_cells[:, 1] < 0) & (self.edge_partner < 0)
        mask &= self.edge_tag != 0
        if tag is not None:
            if tag not in self.tag_names:
                raise MeshError(f"unknown boundary tag {tag!r}")
            mask &= self.edge_tag == self.tag_names.index(tag)
        return np.nonzero(mask)[0]


def _polygon_area_centroid(points: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, points.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _snap_vertices(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge vertices that coincide within SNAP_REL of the domain diameter."""
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    diam = float(np.linalg.norm(hi - lo))
    tol = SNAP_REL * max(diam, 1.0)
    quant = np.round(vertices / tol).astype(np.int64)
    _, first, inverse = np.unique(quant, axis=0, return_index=True, return_inverse=True)
    return vertices[first], inverse


def _orient_twin(verts: np.ndarray, outline: list[int], tol: float) -> list[int]:
    """Rotate a 4-vertex outline so the hanging node comes last.

    After rotation the consecutive side pairs are (leg, leg, half, half),
    which makes slots 2 and 3 the collinear half-edges.
    """
    pts = verts[outline]
    hang = []
    for k in range(4):
        prev_pt, cur, nxt = pts[k - 1], pts[k], pts[(k + 1) % 4]
        d1, d2 = cur - prev_pt, nxt - cur
        cross = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(cross) <= tol and np.dot(d1, d2) > 0.0:
            hang.append(k)
    if len(hang) != 1:
        raise MeshError(
            f"4-vertex cell {outline} is not a twin triangle "
            f"({len(hang)} hanging vertices found)"
        )
    h = hang[0]
    return [outline[(h + 1) % 4], outline[(h + 2) % 4], outline[(h + 3) % 4], outline[h]]


def build_mesh(
    vertices,
    cell_vertex_lists: Sequence[Sequence[int]],
    boundary_spec: Optional[dict] = None,
    *,
    periodic: Optional[dict[str, Sequence[float]]] = None,
    default_tag: str = "outflow",
    cell_regions: Optional[Sequence[int]] = None,
) -> Mesh:
    """Build a mesh from vertices and CCW cell vertex lists.

    Parameters
    ----------
    vertices : (nv, 2) array-like.
    cell_vertex_lists : per-cell vertex indices, length 3 (triangle) or 4
        (twin triangle; the hanging node is detected from collinearity).
    boundary_spec : map ``(va, vb) -> tag`` for boundary edges in either
        vertex order.  Unlisted boundary edges get ``default_tag``.
    periodic : map ``tag -> (tx, ty)`` translation carrying each edge of the
        tag onto its partner edge.  Both half-spaces use the same tag.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must have shape (nv, 2)")
    vertices, remap = _snap_vertices(vertices)
    nv = vertices.shape[0]
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    diam = max(float(np.linalg.norm(hi - lo)), 1.0)
    snap_tol = SNAP_REL * diam

    nc = len(cell_vertex_lists)
    if nc == 0:
        raise MeshError("mesh has no cells")
    cell_vertices = np.full((nc, 4), -1, dtype=np.int64)
    nsides = np.zeros(nc, dtype=np.int64)
    is_twin = np.zeros(nc, dtype=bool)

    for ci, raw in enumerate(cell_vertex_lists):
        outline = [int(remap[v]) for v in raw]
        if len(outline) not in (3, 4):
            raise MeshError(f"cell {ci} has {len(outline)} vertices (want 3 or 4)")
        if len(set(outline)) != len(outline):
            raise MeshError(f"cell {ci} repeats a vertex")
        if max(outline) >= nv or min(outline) < 0:
            raise MeshError(f"cell {ci} references an invalid vertex")
        area, _ = _polygon_area_centroid(vertices[outline])
        if area <= 0.0:
            if area < 0.0:
                raise MeshError(f"cell {ci} is not counterclockwise")
            raise MeshError(f"cell {ci} has zero area")
        if len(outline) == 4:
            outline = _orient_twin(vertices, outline, tol=snap_tol * diam)
            is_twin[ci] = True
        nsides[ci] = len(outline)
        cell_vertices[ci, : len(outline)] = outline

    # Per-cell geometry.
    centroid = np.zeros((nc, 2))
    area = np.zeros(nc)
    for ci in range(nc):
        j = nsides[ci]
        area[ci], centroid[ci] = _polygon_area_centroid(
            vertices[cell_vertices[ci, :j]]
        )

    # Sides, in outline order.
    side_va = np.full((nc, 4), -1, dtype=np.int64)
    side_vb = np.full((nc, 4), -1, dtype=np.int64)
    for ci in range(nc):
        j = nsides[ci]
        out = cell_vertices[ci, :j]
        side_va[ci, :j] = out
        side_vb[ci, :j] = np.roll(out, -1)

    smask = side_va >= 0
    cells_of_side, slots_of_side = np.nonzero(smask)
    sa, sb = side_va[smask], side_vb[smask]
    key_lo, key_hi = np.minimum(sa, sb), np.maximum(sa, sb)
    keys = key_lo * np.int64(nv) + key_hi
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if counts.max(initial=0) > 2:
        bad = uniq[np.argmax(counts)]
        raise MeshError(f"non-manifold edge between vertices {bad // nv} and {bad % nv}")
    ne = uniq.shape[0]

    edge_cells = np.full((ne, 2), -1, dtype=np.int64)
    edge_slots = np.full((ne, 2), -1, dtype=np.int64)
    edge_vv = np.zeros((ne, 2), dtype=np.int64)
    # First incident side becomes the left cell; its traversal fixes vertices.
    order = np.argsort(inverse, kind="stable")
    for idx in order:
        e = inverse[idx]
        pos = 0 if edge_cells[e, 0] < 0 else 1
        edge_cells[e, pos] = cells_of_side[idx]
        edge_slots[e, pos] = slots_of_side[idx]
        if pos == 0:
            edge_vv[e] = (sa[idx], sb[idx])

    pa, pb = vertices[edge_vv[:, 0]], vertices[edge_vv[:, 1]]
    evec = pb - pa
    edge_length = np.linalg.norm(evec, axis=1)
    if edge_length.min(initial=np.inf) <= 0.0:
        raise MeshError("degenerate zero-length edge")
    edge_midpoint = 0.5 * (pa + pb)
    # Left cell traverses va->vb CCW, so its outward normal is (dy, -dx).
    edge_normal = np.column_stack((evec[:, 1], -evec[:, 0])) / edge_length[:, None]

    side_edge = np.full((nc, 4), -1, dtype=np.int64)
    side_edge[cells_of_side, slots_of_side] = inverse

    side_midpoint = np.zeros((nc, 4, 2))
    side_normal = np.zeros((nc, 4, 2))
    side_length = np.zeros((nc, 4))
    sm = edge_midpoint[inverse]
    sn = edge_normal[inverse]
    sl = edge_length[inverse]
    is_left = edge_cells[inverse, 0] == cells_of_side
    sn = np.where(is_left[:, None], sn, -sn)
    side_midpoint[cells_of_side, slots_of_side] = sm
    side_normal[cells_of_side, slots_of_side] = sn
    side_length[cells_of_side, slots_of_side] = sl

    perimeter = side_length.sum(axis=1)
    inscribed = 4.0 * area / perimeter

    # Closed-polygon consistency check: sum of |e| n over each cell vanishes.
    closure = np.abs((side_length[:, :, None] * side_normal).sum(axis=1)).max(axis=1)
    if np.any(closure > 1e-12 * perimeter):
        raise MeshError("cell edge normals do not close (inconsistent geometry)")

    quad_weights = np.zeros((nc, 4))
    quad_weights[:, :3] = 1.0 / 3.0
    quad_weights[is_twin, 2:] = 1.0 / 6.0

    # Boundary tags.
    tag_names = ["interior", default_tag]
    spec = {}
    if boundary_spec:
        for (va, vb), tag in boundary_spec.items():
            a, b = int(remap[va]), int(remap[vb])
            if tag not in tag_names:
                tag_names.append(tag)
            spec[(min(a, b), max(a, b))] = tag_names.index(tag)
    edge_tag = np.zeros(ne, dtype=np.int64)
    boundary = edge_cells[:, 1] < 0
    lo_e = np.minimum(edge_vv[:, 0], edge_vv[:, 1])
    hi_e = np.maximum(edge_vv[:, 0], edge_vv[:, 1])
    for e in np.nonzero(boundary)[0]:
        edge_tag[e] = spec.get((int(lo_e[e]), int(hi_e[e])), 1)

    # Periodic pairing: match each periodic edge to the one at midpoint + T.
    edge_partner = np.full(ne, -1, dtype=np.int64)
    periodic = periodic or {}
    periodic_tags = set()
    for tag, shift in periodic.items():
        if tag not in tag_names:
            raise MeshError(f"periodic tag {tag!r} not present on any edge")
        periodic_tags.add(tag_names.index(tag))
        t = np.asarray(shift, dtype=float)
        group = np.nonzero(boundary & (edge_tag == tag_names.index(tag)))[0]
        mids = edge_midpoint[group]
        quant = np.round(mids / snap_tol).astype(np.int64)
        lookup = {tuple(q): e for q, e in zip(quant, group)}
        for e, m in zip(group, mids):
            if edge_partner[e] >= 0:
                continue
            q = tuple(np.round((m + t) / snap_tol).astype(np.int64))
            partner = lookup.get(q)
            if partner is None or partner == e:
                raise MeshError(f"periodic edge {e} (tag {tag!r}) has no partner")
            if abs(edge_length[e] - edge_length[partner]) > snap_tol:
                raise MeshError(f"periodic edges {e}/{partner} differ in length")
            edge_partner[e] = partner
            edge_partner[partner] = e

    # Neighbors per side; periodic partners count as neighbors with their
    # centroid translated next to the current cell.
    side_neighbor = np.full((nc, 4), -1, dtype=np.int64)
    side_neighbor_centroid = np.full((nc, 4, 2), np.nan)
    interior = edge_cells[:, 1] >= 0
    for pos, other in ((0, 1), (1, 0)):
        cells_h = edge_cells[interior, pos]
        slots_h = edge_slots[interior, pos]
        nb = edge_cells[interior, other]
        side_neighbor[cells_h, slots_h] = nb
        side_neighbor_centroid[cells_h, slots_h] = centroid[nb]
    merged = np.zeros(ne, dtype=bool)
    for e in np.nonzero(edge_partner >= 0)[0]:
        p = edge_partner[e]
        if merged[e] or merged[p]:
            continue
        merged[p] = True  # e is the representative flux edge
        c0, s0 = edge_cells[e, 0], edge_slots[e, 0]
        c1, s1 = edge_cells[p, 0], edge_slots[p, 0]
        shift = edge_midpoint[p] - edge_midpoint[e]
        side_neighbor[c0, s0] = c1
        side_neighbor_centroid[c0, s0] = centroid[c1] - shift
        side_neighbor[c1, s1] = c0
        side_neighbor_centroid[c1, s1] = centroid[c0] + shift
        edge_cells[e, 1] = c1
        edge_slots[e, 1] = s1
    flux_edges = np.nonzero(~merged)[0]

    # Physical-boundary cells: any vertex on a non-periodic boundary edge.
    phys = boundary & (edge_partner < 0)
    bverts = np.zeros(nv, dtype=bool)
    bverts[edge_vv[phys].ravel()] = True
    is_boundary_cell = np.zeros(nc, dtype=bool)
    for ci in range(nc):
        if bverts[cell_vertices[ci, : nsides[ci]]].any():
            is_boundary_cell[ci] = True

    # Moore stencil (vertex sharing), plus periodic edge-partners so that the
    # von Neumann set is always contained in the Moore set.
    vert_cells: list[list[int]] = [[] for _ in range(nv)]
    for ci in range(nc):
        for v in cell_vertices[ci, : nsides[ci]]:
            vert_cells[v].append(ci)
    indptr = [0]
    moore_cells_l: list[int] = []
    moore_centroid_l: list[np.ndarray] = []
    for ci in range(nc):
        seen: dict[int, np.ndarray] = {}
        for v in cell_vertices[ci, : nsides[ci]]:
            for other in vert_cells[v]:
                if other != ci and other not in seen:
                    seen[other] = centroid[other]
        for s in range(nsides[ci]):
            nb = side_neighbor[ci, s]
            if nb >= 0 and nb not in seen:
                seen[nb] = side_neighbor_centroid[ci, s]
        for other in sorted(seen):
            moore_cells_l.append(other)
            moore_centroid_l.append(seen[other])
        indptr.append(len(moore_cells_l))

    regions = np.zeros(nc, dtype=np.int64)
    if cell_regions is not None:
        regions[:] = np.asarray(list(cell_regions), dtype=np.int64)

    return Mesh(
        vertices=vertices,
        cell_vertices=cell_vertices,
        nsides=nsides,
        is_twin=is_twin,
        cell_region=regions,
        centroid=centroid,
        area=area,
        perimeter=perimeter,
        inscribed=inscribed,
        quad_weights=quad_weights,
        side_edge=side_edge,
        side_neighbor=side_neighbor,
        side_neighbor_centroid=side_neighbor_centroid,
        side_midpoint=side_midpoint,
        side_normal=side_normal,
        side_length=side_length,
        edge_vertices=edge_vv,
        edge_cells=edge_cells,
        edge_slots=edge_slots,
        edge_length=edge_length,
        edge_midpoint=edge_midpoint,
        edge_normal=edge_normal,
        edge_tag=edge_tag,
        tag_names=tuple(tag_names),
        edge_partner=edge_partner,
        flux_edges=flux_edges,
        is_boundary_cell=is_boundary_cell,
        moore_indptr=np.asarray(indptr, dtype=np.int64),
        moore_cells=np.asarray(moore_cells_l, dtype=np.int64),
        moore_centroid=(
            np.asarray(moore_centroid_l) if moore_centroid_l else np.zeros((0, 2))
        ),
    )


def von_neumann_neighbors(mesh: Mesh, cell_id: int) -> list[Optional[int]]:
    """Edge neighbors in side order; None marks a boundary side."""
    j = int(mesh.nsides[cell_id])
    return [int(n) if n >= 0 else None for n in mesh.side_neighbor[cell_id, :j]]


def moore_neighbors(mesh: Mesh, cell_id: int) -> list[int]:
    """Cells sharing at least one vertex (plus periodic edge partners)."""
    lo, hi = mesh.moore_indptr[cell_id], mesh.moore_indptr[cell_id + 1]
    return [int(c) for c in mesh.moore_cells[lo:hi]]


def min_inscribed_diameter(mesh: Mesh) -> float:
    """Mesh size h: the smallest 4*area/perimeter over all cells."""
    return float(mesh.inscribed.min())


# ---------------------------------------------------------------------------
# Generators


def uniform_diagonal_mesh(
    nx: int,
    ny: Optional[int] = None,
    *,
    origin=(0.0, 0.0),
    size=(1.0, 1.0),
    periodic: bool = False,
    tags: Optional[dict[str, str]] = None,
) -> Mesh:
    """Rectangle split into an nx x ny grid of quads, each cut by a diagonal.

    Produces the usual "nx x ny x 2" triangle mesh.  With ``periodic`` the
    four sides are pairwise identified by translation.
    """
    if ny is None:
        ny = nx
    if nx < 1 or ny < 1:
        raise MeshError("need at least one cell per direction")
    x0, y0 = origin
    w, h = size
    xs = x0 + w * np.arange(nx + 1) / nx
    ys = y0 + h * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack((X.ravel(), Y.ravel()))

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))

    names = {"left": "left", "right": "right", "bottom": "bottom", "top": "top"}
    if periodic:
        names = {
            "left": "periodic-x",
            "right": "periodic-x",
            "bottom": "periodic-y",
            "top": "periodic-y",
        }
    if tags:
        names.update(tags)
    spec = {}
    for j in range(ny):
        spec[(vid(0, j), vid(0, j + 1))] = names["left"]
        spec[(vid(nx, j), vid(nx, j + 1))] = names["right"]
    for i in range(nx):
        spec[(vid(i, 0), vid(i + 1, 0))] = names["bottom"]
        spec[(vid(i, ny), vid(i + 1, ny))] = names["top"]
    per = None
    if periodic:
        per = {"periodic-x": (w, 0.0), "periodic-y": (0.0, h)}
    return build_mesh(verts, cells, spec, periodic=per)


def jittered_mesh(
    nx: int,
    ny: Optional[int] = None,
    *,
    amplitude: float = 0.15,
    seed: int = 0,
    origin=(0.0, 0.0),
    size=(1.0, 1.0),
    periodic: bool = False,
    tags: Optional[dict[str, str]] = None,
) -> Mesh:
    """Uniform diagonal mesh with interior vertices shifted by a random
    fraction of the local spacing (boundary vertices stay put)."""
    if ny is None:
        ny = nx
    base = uniform_diagonal_mesh(
        nx, ny, origin=origin, size=size, periodic=periodic, tags=tags
    )
    rng = np.random.default_rng(seed)
    verts = base.vertices.copy()
    x0, y0 = origin
    w, h = size
    dx, dy = w / nx, h / ny
    eps = 1e-12 * max(w, h)
    interior = (
        (verts[:, 0] > x0 + eps)
        & (verts[:, 0] < x0 + w - eps)
        & (verts[:, 1] > y0 + eps)
        & (verts[:, 1] < y0 + h - eps)
    )
    shift = rng.uniform(-amplitude, amplitude, size=(interior.sum(), 2))
    verts[interior, 0] += shift[:, 0] * dx
    verts[interior, 1] += shift[:, 1] * dy

    cells = [
        tuple(base.cell_vertices[ci, : base.nsides[ci]]) for ci in range(base.num_cells)
    ]
    spec = {}
    for e in range(base.num_edges):
        if base.edge_tag[e] != 0:
            va, vb = base.edge_vertices[e]
            spec[(int(va), int(vb))] = base.tag_names[base.edge_tag[e]]
    per = {"periodic-x": (w, 0.0), "periodic-y": (0.0, h)} if periodic else None
    return build_mesh(verts, cells, spec, periodic=per)


def stretched_mesh(
    nx: int,
    ny: int,
    *,
    stretch_factor: float = 1.2,
    shift_amplitude: float = 0.3,
    rng_seed: int = 0,
    origin=(0.0, 0.0),
    size=(1.0, 1.0),
    tags: Optional[dict[str, str]] = None,
) -> Mesh:
    """Quad mesh stretched toward the horizontal midline, randomly sheared in
    x, then split along the diagonals.

    Row heights form a geometric sequence with the given ratio, symmetric
    about the midline (finest rows next to it).  Interior nodes are shifted
    in x by a uniform random fraction (at most ``shift_amplitude``) of the
    local column spacing, which cannot invert any cell.
    """
    if nx < 2 or ny < 2:
        raise MeshError("stretched mesh needs nx, ny >= 2")
    if ny % 2 != 0:
        raise MeshError("stretched mesh needs an even number of rows")
    x0, y0 = origin
    w, h = size
    half = ny // 2
    r = float(stretch_factor)
    if r == 1.0:
        heights = np.full(half, 0.5 * h / half)
    else:
        h0 = 0.5 * h * (r - 1.0) / (r**half - 1.0)
        heights = h0 * r ** np.arange(half)
    up = y0 + 0.5 * h + np.concatenate(([0.0], np.cumsum(heights)))
    ys = np.concatenate(((y0 + h - up[::-1])[:-1], up))

    xs = x0 + w * np.arange(nx + 1) / nx
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    rng = np.random.default_rng(rng_seed)
    dx = w / nx
    shift = rng.uniform(-shift_amplitude, shift_amplitude, size=X.shape) * dx
    shift[0, :] = 0.0
    shift[-1, :] = 0.0
    shift[:, 0] = 0.0
    shift[:, -1] = 0.0
    X = X + shift
    verts = np.column_stack((X.ravel(), Y.ravel()))

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    names = {"left": "left", "right": "right", "bottom": "bottom", "top": "top"}
    if tags:
        names.update(tags)
    spec = {}
    for j in range(ny):
        spec[(vid(0, j), vid(0, j + 1))] = names["left"]
        spec[(vid(nx, j), vid(nx, j + 1))] = names["right"]
    for i in range(nx):
        spec[(vid(i, 0), vid(i + 1, 0))] = names["bottom"]
        spec[(vid(i, ny), vid(i + 1, ny))] = names["top"]
    return build_mesh(verts, cells, spec)


# ---------------------------------------------------------------------------
# Text format I/O
#
#   vertices N cells M
#   x y                 (N lines)
#   k v1 ... vk tag     (M lines)
#   edge va vb tag      (boundary section)


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"vertices {mesh.num_vertices} cells {mesh.num_cells}"]
    for p in mesh.vertices:
        lines.append(f"{float(p[0])!r} {float(p[1])!r}")
    for ci in range(mesh.num_cells):
        j = int(mesh.nsides[ci])
        vv = " ".join(str(int(v)) for v in mesh.cell_vertices[ci, :j])
        lines.append(f"{j} {vv} {int(mesh.cell_region[ci])}")
    for e in range(mesh.num_edges):
        if mesh.edge_cells[e, 1] >= 0 and mesh.edge_partner[e] < 0:
            continue
        if mesh.edge_tag[e] == 0:
            continue
        va, vb = mesh.edge_vertices[e]
        lines.append(f"edge {int(va)} {int(vb)} {mesh.tag_names[mesh.edge_tag[e]]}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_mesh(
    path,
    *,
    periodic: Optional[dict[str, Sequence[float]]] = None,
    default_tag: str = "outflow",
) -> Mesh:
    with open(path) as f:
        tokens = f.read().split()
    if len(tokens) < 4 or tokens[0] != "vertices" or tokens[2] != "cells":
        raise MeshError("mesh file must start with 'vertices N cells M'")
    n, m = int(tokens[1]), int(tokens[3])
    pos = 4
    verts = np.array(tokens[pos : pos + 2 * n], dtype=float).reshape(n, 2)
    pos += 2 * n
    cells = []
    regions = []
    for _ in range(m):
        k = int(tokens[pos])
        cells.append([int(t) for t in tokens[pos + 1 : pos + 1 + k]])
        regions.append(int(tokens[pos + 1 + k]))
        pos += k + 2
    spec = {}
    while pos < len(tokens):
        if tokens[pos] != "edge":
            raise MeshError(f"unexpected token {tokens[pos]!r} in boundary section")
        va, vb, tag = int(tokens[pos + 1]), int(tokens[pos + 2]), tokens[pos + 3]
        spec[(va, vb)] = tag
        pos += 4
    return build_mesh(
        verts,
        cells,
        spec,
        periodic=periodic,
        default_tag=default_tag,
        cell_regions=regions,
    )
