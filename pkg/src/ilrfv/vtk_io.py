"""Legacy-VTK (ASCII) unstructured-grid writer.

Triangles are emitted as VTK_TRIANGLE (5) and twin triangles as VTK_QUAD (9)
using their four outline vertices.  Field arrays become CELL_DATA scalars.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

_CELL_TYPES = {3: 5, 4: 9}


def write_vtk(mesh: Mesh, fields: dict, path, *, title: str = "ilrfv") -> None:
    """Write cell data to a legacy VTK file.

    ``fields`` maps names to per-cell arrays: (nc,) scalars or (nc, k)
    component blocks, written as k separate scalar arrays named name_i.
    """
    nc = mesh.num_cells
    sizes = mesh.nsides
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for p in mesh.vertices:
        lines.append(f"{p[0]:.16g} {p[1]:.16g} 0")
    total = int(sizes.sum()) + nc
    lines.append(f"CELLS {nc} {total}")
    for ci in range(nc):
        j = int(sizes[ci])
        vs = " ".join(str(int(v)) for v in mesh.cell_vertices[ci, :j])
        lines.append(f"{j} {vs}")
    lines.append(f"CELL_TYPES {nc}")
    lines.extend(str(_CELL_TYPES[int(j)]) for j in sizes)

    scalars = []
    for name, data in fields.items():
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 1:
            scalars.append((name, arr))
        else:
            for k in range(arr.shape[1]):
                scalars.append((f"{name}_{k}", arr[:, k]))
    if scalars:
        lines.append(f"CELL_DATA {nc}")
        for name, arr in scalars:
            if arr.shape[0] != nc:
                raise ValueError(f"field {name!r} has {arr.shape[0]} entries, "
                                 f"mesh has {nc} cells")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.16g}" for v in arr)
    Path(path).write_text("\n".join(lines) + "\n")
