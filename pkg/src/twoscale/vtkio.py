"""Legacy ASCII VTK output for quadrilateral grids.

Writes DATASET UNSTRUCTURED_GRID files with quad cells (VTK type 9) and
optional nodal/cell fields. Output bytes are a pure function of the inputs:
fixed float formatting, insertion-ordered fields, no timestamps.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

VTK_QUAD = 9


def _fmt(values) -> str:
    return " ".join(f"{v:.9g}" for v in values)


def _field_lines(name: str, data: np.ndarray, count: int, kind: str) -> list:
    data = np.asarray(data, dtype=float)
    if data.shape[0] != count:
        raise ValueError(f"field {name!r} has {data.shape[0]} entries, "
                         f"expected {count}")
    lines = []
    if data.ndim == 1:
        lines.append(f"SCALARS {name} float 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.9g}" for v in data)
    elif data.ndim == 2 and data.shape[1] in (2, 3):
        vec = np.zeros((count, 3))
        vec[:, :data.shape[1]] = data
        lines.append(f"VECTORS {name} float")
        lines.extend(_fmt(row) for row in vec)
    else:
        raise ValueError(f"field {name!r} must be scalar or 2/3-vector, "
                         f"got shape {data.shape} ({kind})")
    return lines


def write_vtk(path, points: np.ndarray, cells: np.ndarray,
              point_data: dict | None = None,
              cell_data: dict | None = None,
              title: str = "structured quad grid") -> None:
    """Write an unstructured grid of quads with attached fields.

    `points` may be (n, 2) or (n, 3); two-dimensional coordinates get a
    zero third component. `cells` is (m, 4) vertex indices per quad.
    """
    points = np.asarray(points, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    if points.ndim != 2 or points.shape[1] not in (2, 3):
        raise ValueError(f"points must be (n, 2) or (n, 3), got {points.shape}")
    if cells.ndim != 2 or cells.shape[1] != 4:
        raise ValueError(f"cells must be (m, 4), got {cells.shape}")
    if cells.size and (cells.min() < 0 or cells.max() >= len(points)):
        raise ValueError("cell connectivity references nonexistent points")
    xyz = np.zeros((len(points), 3))
    xyz[:, :points.shape[1]] = points

    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(points)} float",
    ]
    lines.extend(_fmt(row) for row in xyz)
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines.extend("4 " + " ".join(str(v) for v in quad) for quad in cells)
    lines.append(f"CELL_TYPES {len(cells)}")
    lines.extend([str(VTK_QUAD)] * len(cells))

    if point_data:
        lines.append(f"POINT_DATA {len(points)}")
        for name, data in point_data.items():
            lines.extend(_field_lines(name, data, len(points), "point data"))
    if cell_data:
        lines.append(f"CELL_DATA {len(cells)}")
        for name, data in cell_data.items():
            lines.extend(_field_lines(name, data, len(cells), "cell data"))

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
