"""Finite-volume solver on unstructured triangular meshes whose slope
limiting is a per-cell convex QP (integrated linear reconstruction)."""

from ._kernels import BACKEND as kernel_backend
from .mesh import (
    Mesh,
    MeshError,
    build_mesh,
    jittered_mesh,
    min_inscribed_diameter,
    moore_neighbors,
    read_mesh,
    stretched_mesh,
    uniform_diagonal_mesh,
    von_neumann_neighbors,
    write_mesh,
)
from .qp import QPProblem, QPResult, equality_subproblem, solve_qp, step_length
from .reconstruction import (
    BARTH,
    ILR,
    UNLIMITED,
    DegenerateStencilError,
    PositivityError,
    ReconstructedField,
    reconstruct,
    reconstruct_euler,
)
from .time_integration import (
    Scheme,
    SolverAbort,
    TimeStepPolicy,
    euler_forward_step,
    ssp_rk2_step,
)

__version__ = "0.1.0"
