"""Benchmark problems, exact solutions, error norms, and the TV diagnostic.

Five cases: advection of a double sine wave (convergence), solid body
rotation of hump/cone/slotted-cylinder profiles on a stretched mesh (total
variation), double Mach reflection, the Mach 3 forward-facing step with
adaptive refinement, and the Sedov point blast run as axisymmetric Euler
with a geometric source term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .mesh import Mesh, build_mesh, jittered_mesh, stretched_mesh, uniform_diagonal_mesh
from .physics import GAMMA_DEFAULT, HLLC, LLF, UPWIND, conservative
from .time_integration import (
    EULER,
    EULER_AXISYMMETRIC,
    SCALAR,
    EulerInflow,
    EulerOutflow,
    EulerWall,
    ScalarDirichlet,
    ScalarOutflow,
    TimeStepPolicy,
)

DOUBLE_SINE = "double-sine"
SOLID_BODY_ROTATION = "solid-body-rotation"
DOUBLE_MACH = "double-mach"
FORWARD_STEP = "forward-step"
SEDOV = "sedov"
CASES = (DOUBLE_SINE, SOLID_BODY_ROTATION, DOUBLE_MACH, FORWARD_STEP, SEDOV)

SEDOV_E0 = 0.851072


@dataclass
class AmrConfig:
    threshold: float = 0.6
    interval: int = 1
    max_level: int = 1
    pinned: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class CaseSetup:
    name: str
    mesh: Mesh
    state: np.ndarray
    kind: str
    flux: str
    bcs: dict
    policy: TimeStepPolicy
    end_time: float
    gamma: float = GAMMA_DEFAULT
    velocity: object = None
    exact: Optional[Callable] = None
    amr: Optional[AmrConfig] = None


@dataclass
class ErrorReport:
    cells: int
    l1: float
    linf: float
    l1_order: float = math.nan
    linf_order: float = math.nan
    recon_seconds: float = math.nan


def project(mesh: Mesh, fn: Callable) -> np.ndarray:
    """Cell averages of fn(x, y) by the edge-midpoint quadrature rule
    (exact for linear integrands, including twin cells)."""
    vals = fn(mesh.side_midpoint[..., 0], mesh.side_midpoint[..., 1])
    return (mesh.quad_weights * vals).sum(axis=1)


def project_euler(mesh: Mesh, fn: Callable) -> np.ndarray:
    """Cell averages of a conservative state function fn(x, y) -> (..., 4)."""
    vals = fn(mesh.side_midpoint[..., 0], mesh.side_midpoint[..., 1])
    return (mesh.quad_weights[..., None] * vals).sum(axis=1)


def error_norms(mesh: Mesh, values: np.ndarray, exact: Callable) -> ErrorReport:
    """L1 and Linf errors against the exact solution's cell averages."""
    target = project(mesh, exact)
    err = np.abs(np.asarray(values) - target)
    return ErrorReport(
        cells=mesh.num_cells,
        l1=float(mesh.area @ err),
        linf=float(err.max()),
    )


def discrete_tv(mesh: Mesh, recon, bcs: dict, t: float = 0.0) -> float:
    """Total variation of the piecewise-linear field: the gradient-magnitude
    area integral plus half the trace-jump integral per cell side (interior
    edges are seen from both sides, boundary edges once against the imposed
    exterior value)."""
    tv = float(np.linalg.norm(recon.gradients, axis=1) @ mesh.area)
    fe = mesh.flux_edges
    eL, eR = mesh.edge_cells[fe, 0], mesh.edge_cells[fe, 1]
    sL, sR = mesh.edge_slots[fe, 0], mesh.edge_slots[fe, 1]
    elen = mesh.edge_length[fe]
    inner = eR >= 0
    uL = recon.traces[eL, sL]
    uR = np.where(inner, recon.traces[np.maximum(eR, 0), np.maximum(sR, 0)], 0.0)
    factor = np.where(inner, 1.0, 0.5)
    for pos in np.nonzero(~inner)[0]:
        tag = mesh.tag_names[mesh.edge_tag[fe[pos]]]
        bc = bcs.get(tag)
        if isinstance(bc, ScalarDirichlet):
            uR[pos] = bc(mesh.edge_midpoint[fe[pos]][None, :], t)[0]
        else:
            uR[pos] = uL[pos]
    return tv + float((factor * np.abs(uL - uR) * elen).sum())


# ---------------------------------------------------------------------------
# Scalar case ingredients


def double_sine(x, y):
    return np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)


def rotation_profile(x, y):
    """Slotted cylinder, cone, and cosine hump inside r0 = 0.15 circles."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    r0 = 0.15

    r = np.sqrt((x - 0.5) ** 2 + (y - 0.75) ** 2) / r0
    slot = (r <= 1.0) & ((np.abs(x - 0.5) >= 0.025) | (y >= 0.85))
    out = np.where(slot, 1.0, out)

    r = np.sqrt((x - 0.5) ** 2 + (y - 0.25) ** 2) / r0
    out = np.where(r <= 1.0, 1.0 - r, out)

    r = np.sqrt((x - 0.25) ** 2 + (y - 0.5) ** 2) / r0
    out = np.where(r <= 1.0, 0.25 * (1.0 + np.cos(np.pi * np.minimum(r, 1.0))), out)
    return out


def rotation_velocity(points: np.ndarray) -> np.ndarray:
    v = np.empty_like(points)
    v[:, 0] = -(points[:, 1] - 0.5)
    v[:, 1] = points[:, 0] - 0.5
    return v


# ---------------------------------------------------------------------------
# Rankine-Hugoniot and the double Mach setup


def normal_shock_state(mach: float, rho1: float, p1: float, gamma: float):
    """Post-shock density, pressure and normal piston speed for a shock of
    the given Mach number running into still gas."""
    m2 = mach * mach
    rho2 = rho1 * (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0)
    p2 = p1 * (2.0 * gamma * m2 - (gamma - 1.0)) / (gamma + 1.0)
    c1 = math.sqrt(gamma * p1 / rho1)
    u_piston = 2.0 * (m2 - 1.0) / ((gamma + 1.0) * mach) * c1
    return rho2, p2, u_piston


_DM_NORMAL = np.array([math.sqrt(3.0) / 2.0, -0.5])  # shock travel direction
_DM_FOOT = 1.0 / 6.0


def _double_mach_states(gamma):
    rho2, p2, up = normal_shock_state(10.0, 1.4, 1.0, gamma)
    pre = conservative(1.4, 0.0, 0.0, 1.0, gamma)
    post = conservative(rho2, up * _DM_NORMAL[0], up * _DM_NORMAL[1], p2, gamma)
    return pre, post


def double_mach_state_at(x, y, t, gamma=GAMMA_DEFAULT):
    """Exact pre/post state of the unperturbed moving oblique shock."""
    pre, post = _double_mach_states(gamma)
    xi = (np.asarray(x) - _DM_FOOT) * _DM_NORMAL[0] + np.asarray(y) * _DM_NORMAL[1]
    behind = xi < 10.0 * t
    return np.where(np.asarray(behind)[..., None], post, pre)


# ---------------------------------------------------------------------------
# Sedov self-similar solution (spherical blast seen as axisymmetric flow)


class SedovSolution:
    """Self-similar point-blast profile for a gamma-law gas.

    The similarity system for scaled velocity U, density Omega, and squared
    sound speed Z in xi = r / R(t) is integrated inward from the strong-shock
    values at xi = 1; the energy integral then fixes the similarity constant
    alpha in R(t) = (E0 t^2 / (alpha rho0))^(1/5).
    """

    def __init__(self, gamma: float = GAMMA_DEFAULT, e0: float = SEDOV_E0,
                 rho0: float = 1.0):
        self.gamma = gamma
        self.e0 = e0
        self.rho0 = rho0
        self._tabulate()

    def _rhs(self, xi, y):
        g = self.gamma
        U, _, Z = y
        d = U - xi
        lhs = np.array(
            [
                [1.0, d, 0.0],
                [d, Z / g, 1.0 / g],
                [0.0, (1.0 - g) * d, d / Z],
            ]
        )
        rhs = np.array([-2.0 * U / xi, 1.5 * U, 3.0])
        up, om, zp = np.linalg.solve(lhs, rhs)
        return [up, om, zp]

    def _tabulate(self):
        g = self.gamma
        y1 = [2.0 / (g + 1.0), math.log((g + 1.0) / (g - 1.0)),
              2.0 * g * (g - 1.0) / (g + 1.0) ** 2]
        xi_min = 1e-4
        sol = solve_ivp(
            self._rhs, (1.0, xi_min), y1, dense_output=True,
            rtol=1e-10, atol=1e-12, method="Radau",
        )
        if not sol.success:
            raise RuntimeError(f"similarity integration failed: {sol.message}")
        self._xi = np.geomspace(xi_min, 1.0, 2000)
        vals = sol.sol(self._xi)
        self._U = vals[0]
        self._omega = np.exp(vals[1])
        self._Z = vals[2]

        def integrand(xi):
            U, lnO, Z = sol.sol(xi)
            O = math.exp(lnO)
            return (0.5 * O * U * U + O * Z / (g * (g - 1.0))) * xi * xi

        I, _ = quad(integrand, xi_min, 1.0, limit=200)
        self.alpha = 16.0 * math.pi * I / 25.0

    def shock_radius(self, t: float) -> float:
        return (self.e0 * t * t / (self.alpha * self.rho0)) ** 0.2

    def shock_speed(self, t: float) -> float:
        return 0.4 * self.shock_radius(t) / t

    def profile(self, r, t: float):
        """(rho, radial velocity, pressure) at spherical radius r."""
        r = np.asarray(r, dtype=float)
        R = self.shock_radius(t)
        Rdot = self.shock_speed(t)
        xi = np.clip(r / R, self._xi[0], None)
        inside = xi < 1.0
        xi_c = np.clip(xi, self._xi[0], 1.0)
        rho = np.where(inside, self.rho0 * np.interp(xi_c, self._xi, self._omega),
                       self.rho0)
        u = np.where(inside, Rdot * np.interp(xi_c, self._xi, self._U), 0.0)
        z = np.interp(xi_c, self._xi, self._Z)
        p = np.where(inside, rho * z * Rdot * Rdot / self.gamma, 0.0)
        return rho, u, p


_sedov_cache: dict = {}


def sedov_solution(gamma=GAMMA_DEFAULT, e0=SEDOV_E0, rho0=1.0) -> SedovSolution:
    key = (gamma, e0, rho0)
    if key not in _sedov_cache:
        _sedov_cache[key] = SedovSolution(gamma, e0, rho0)
    return _sedov_cache[key]


# ---------------------------------------------------------------------------
# Exact solutions


def exact_solution(case: str, x, y, t: float):
    """Pointwise exact value (the advected scalar, or the blast density)."""
    if case == DOUBLE_SINE:
        return double_sine(np.asarray(x) - t, np.asarray(y) - 2.0 * t)
    if case == SOLID_BODY_ROTATION:
        ca, sa = math.cos(t), math.sin(t)
        dx, dy = np.asarray(x) - 0.5, np.asarray(y) - 0.5
        return rotation_profile(0.5 + ca * dx + sa * dy, 0.5 - sa * dx + ca * dy)
    if case == SEDOV:
        r = np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2)
        return sedov_solution().profile(r, t)[0]
    raise ValueError(f"case {case!r} has no exact solution")


# ---------------------------------------------------------------------------
# Case setup


def _retag(mesh: Mesh, tag_fn, periodic=None) -> Mesh:
    """Rebuild a mesh with boundary tags chosen per edge midpoint."""
    cells = [
        tuple(int(v) for v in mesh.cell_vertices[ci, : mesh.nsides[ci]])
        for ci in range(mesh.num_cells)
    ]
    spec = {}
    for e in range(mesh.num_edges):
        if mesh.edge_cells[e, 1] >= 0 or mesh.edge_tag[e] == 0:
            continue
        old = mesh.tag_names[mesh.edge_tag[e]]
        tag = tag_fn(mesh.edge_midpoint[e], old)
        va, vb = (int(v) for v in mesh.edge_vertices[e])
        spec[(va, vb)] = tag
    return build_mesh(mesh.vertices, cells, spec, periodic=periodic)


def forward_step_mesh(ny: int = 30) -> Mesh:
    """Wind-tunnel mesh: [0,3]x[0,1] minus the step [0.6,3]x[0,0.2]."""
    if ny % 5 != 0:
        raise ValueError("ny must be a multiple of 5 so the step is resolved")
    nx = 3 * ny
    dx = 1.0 / ny
    i_step = int(round(0.6 / dx))
    j_step = int(round(0.2 / dx))
    xs = 3.0 * np.arange(nx + 1) / nx
    ys = 1.0 * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack((X.ravel(), Y.ravel()))

    def vid(i, j):
        return i * (ny + 1) + j

    cells = []
    for i in range(nx):
        for j in range(ny):
            if i >= i_step and j < j_step:
                continue
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))

    spec = {}
    for j in range(ny):
        spec[(vid(0, j), vid(0, j + 1))] = "inflow"
        if j >= j_step:
            spec[(vid(nx, j), vid(nx, j + 1))] = "outflow"
    for i in range(nx):
        spec[(vid(i, ny), vid(i + 1, ny))] = "wall"
        if i < i_step:
            spec[(vid(i, 0), vid(i + 1, 0))] = "wall"
        else:
            spec[(vid(i, j_step), vid(i + 1, j_step))] = "wall"
    for j in range(j_step):
        spec[(vid(i_step, j), vid(i_step, j + 1))] = "wall"
    return build_mesh(verts, cells, spec, default_tag="wall")


def setup_case(
    case: str,
    resolution: Optional[int] = None,
    *,
    seed: int = 0,
    flux: Optional[str] = None,
    mesh: Optional[Mesh] = None,
) -> CaseSetup:
    """Mesh, initial cell averages, boundary setup, and time policy for a
    benchmark case at the given resolution (see each branch for its meaning).
    """
    if case == DOUBLE_SINE:
        n = resolution or 32
        m = mesh if mesh is not None else uniform_diagonal_mesh(n, n, periodic=True)
        return CaseSetup(
            name=case,
            mesh=m,
            state=project(m, double_sine),
            kind=SCALAR,
            velocity=(1.0, 2.0),
            flux=flux or UPWIND,
            bcs={},
            policy=TimeStepPolicy(cfl_number=0.3),
            end_time=1.0,
            exact=lambda x, y, t: exact_solution(case, x, y, t),
        )

    if case == SOLID_BODY_ROTATION:
        n = resolution or 20
        m = mesh if mesh is not None else stretched_mesh(n, 2 * n, rng_seed=seed)
        h = float(m.inscribed.min())
        bc = ScalarDirichlet(0.0)
        return CaseSetup(
            name=case,
            mesh=m,
            state=project(m, rotation_profile),
            kind=SCALAR,
            velocity=rotation_velocity,
            flux=flux or UPWIND,
            bcs={"left": bc, "right": bc, "bottom": bc, "top": bc},
            policy=TimeStepPolicy(fixed_dt=0.6 * math.pi * h),
            end_time=2.0 * math.pi,
            exact=lambda x, y, t: exact_solution(case, x, y, t),
        )

    if case == DOUBLE_MACH:
        ny = resolution or 35
        gamma = GAMMA_DEFAULT
        base = mesh if mesh is not None else uniform_diagonal_mesh(
            4 * ny, ny, size=(4.0, 1.0)
        )

        def tags(mid, old):
            if old == "bottom":
                return "bottom-post" if mid[0] < _DM_FOOT else "wall"
            return {"left": "inflow", "right": "outflow", "top": "top"}[old]

        m = _retag(base, tags)
        pre, post = _double_mach_states(gamma)

        def initial(x, y):
            return double_mach_state_at(x, y, 0.0, gamma)

        def top_state(points, t):
            return double_mach_state_at(points[:, 0], points[:, 1], t, gamma)

        return CaseSetup(
            name=case,
            mesh=m,
            state=project_euler(m, initial),
            kind=EULER,
            flux=flux or HLLC,
            bcs={
                "inflow": EulerInflow(post),
                "outflow": EulerOutflow(),
                "wall": EulerWall(),
                "bottom-post": EulerInflow(post),
                "top": EulerInflow(top_state),
            },
            policy=TimeStepPolicy(),
            end_time=0.2,
            gamma=gamma,
        )

    if case == FORWARD_STEP:
        ny = resolution or 30
        m = mesh if mesh is not None else forward_step_mesh(ny)
        gamma = GAMMA_DEFAULT
        inflow = conservative(1.4, 3.0, 0.0, 1.0, gamma)
        state = np.broadcast_to(inflow, (m.num_cells, 4)).copy()
        corner = np.array([0.6, 0.2])
        dist = np.linalg.norm(m.centroid - corner, axis=1)
        pinned = np.nonzero(dist < 2.5 / ny)[0]
        return CaseSetup(
            name=case,
            mesh=m,
            state=state,
            kind=EULER,
            flux=flux or HLLC,
            bcs={
                "inflow": EulerInflow(inflow),
                "outflow": EulerOutflow(),
                "wall": EulerWall(),
            },
            policy=TimeStepPolicy(),
            end_time=4.0,
            gamma=gamma,
            amr=AmrConfig(threshold=0.6, interval=1, pinned=pinned),
        )

    if case == SEDOV:
        n = resolution or 80
        gamma = GAMMA_DEFAULT
        m = mesh if mesh is not None else uniform_diagonal_mesh(
            n, n, size=(1.2, 1.2)
        )

        def tags(mid, old):
            return {"left": "axis", "bottom": "symmetry",
                    "right": "outflow", "top": "outflow"}[old]

        m = _retag(m, tags)
        length = 1.2 / n
        e_corner = SEDOV_E0 / (2.0 * math.pi * length**3)
        E = np.full(m.num_cells, 1e-12)
        in_corner = (m.centroid[:, 0] < length) & (m.centroid[:, 1] < length)
        E[in_corner] = e_corner
        # radius-weighted state U = r * (rho, 0, 0, E)
        state = np.zeros((m.num_cells, 4))
        state[:, 0] = m.centroid[:, 0] * 1.0
        state[:, 3] = m.centroid[:, 0] * E
        return CaseSetup(
            name=case,
            mesh=m,
            state=state,
            kind=EULER_AXISYMMETRIC,
            flux=flux or LLF,
            bcs={
                "axis": EulerWall(),
                "symmetry": EulerWall(),
                "outflow": EulerOutflow(),
            },
            policy=TimeStepPolicy(),
            end_time=1.0,
            gamma=gamma,
            exact=lambda x, y, t: exact_solution(case, x, y, t),
        )

    raise ValueError(f"unknown case {case!r} (choose from {', '.join(CASES)})")
