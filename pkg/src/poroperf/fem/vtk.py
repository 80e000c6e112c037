"""Legacy ASCII VTK unstructured-grid writer."""
from __future__ import annotations

import numpy as np

_CELL_TYPE = {2: 5, 3: 10}   # triangle, tetrahedron


def _fmt(a):
    return " ".join(f"{v:.17g}" for v in a)


def write_vtk(path, mesh, point_data=None, cell_data=None, title="poroperf"):
    pts = mesh.points
    if mesh.dim == 2:
        pts = np.hstack([pts, np.zeros((pts.shape[0], 1))])
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {pts.shape[0]} double"]
    lines += [_fmt(p) for p in pts]
    nc, k = mesh.cells.shape
    lines.append(f"CELLS {nc} {nc * (k + 1)}")
    lines += [f"{k} " + " ".join(map(str, c)) for c in mesh.cells.tolist()]
    lines.append(f"CELL_TYPES {nc}")
    lines += [str(_CELL_TYPE[mesh.dim])] * nc

    def block(data, n):
        out = []
        for name, arr in (data or {}).items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [f"{v:.17g}" for v in arr]
            else:
                if arr.shape[1] == 2:
                    arr = np.hstack([arr, np.zeros((n, 1))])
                out += [f"VECTORS {name} double"] + [_fmt(v) for v in arr]
        return out

    if point_data:
        lines.append(f"POINT_DATA {pts.shape[0]}")
        lines += block(point_data, pts.shape[0])
    if cell_data:
        lines.append(f"CELL_DATA {nc}")
        lines += block(cell_data, nc)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
