import numpy as np
import pytest

from twoscale.mesh import build_macro_grid
from twoscale.vtkio import write_vtk

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
QUAD = np.array([[0, 1, 2, 3]])


def test_single_quad_layout(tmp_path):
    path = tmp_path / "cell.vtk"
    write_vtk(path, UNIT, QUAD,
              point_data={"c": np.array([0.0, 0.25, 0.5, 1.0]),
                          "u": np.array([[1.0, 2.0]] * 4)},
              cell_data={"jstar": np.array([0.5])})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[4] == "POINTS 4 float"
    assert lines[5] == "0 0 0"
    assert "CELLS 1 5" in lines
    assert "4 0 1 2 3" in lines
    idx = lines.index("CELL_TYPES 1")
    assert lines[idx + 1] == "9"
    assert "POINT_DATA 4" in lines
    assert "SCALARS c float 1" in lines
    assert "LOOKUP_TABLE default" in lines
    # planar vectors gain a zero third component
    assert "VECTORS u float" in lines
    assert lines[lines.index("VECTORS u float") + 1] == "1 2 0"
    assert "CELL_DATA 1" in lines
    assert "SCALARS jstar float 1" in lines


def test_macro_grid_roundtrip_counts(tmp_path):
    grid = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 2)
    path = tmp_path / "grid.vtk"
    write_vtk(path, grid.vertices, grid.cells,
              point_data={"c": np.zeros(grid.num_nodes)})
    text = path.read_text()
    assert f"POINTS {grid.num_nodes} float" in text
    assert f"CELLS {grid.num_cells} {5 * grid.num_cells}" in text
    assert text.count("\n9\n") + text.count("\n9") >= grid.num_cells


def test_output_bytes_are_deterministic(tmp_path):
    a, b = tmp_path / "a.vtk", tmp_path / "b.vtk"
    data = {"c": np.linspace(0.0, 1.0, 4), "u": np.ones((4, 2))}
    write_vtk(a, UNIT, QUAD, point_data=data)
    write_vtk(b, UNIT, QUAD, point_data=data)
    assert a.read_bytes() == b.read_bytes()


def test_validation_errors(tmp_path):
    path = tmp_path / "bad.vtk"
    with pytest.raises(ValueError, match="points"):
        write_vtk(path, np.zeros((4,)), QUAD)
    with pytest.raises(ValueError, match="cells"):
        write_vtk(path, UNIT, np.array([[0, 1, 2]]))
    with pytest.raises(ValueError, match="nonexistent"):
        write_vtk(path, UNIT, np.array([[0, 1, 2, 9]]))
    with pytest.raises(ValueError, match="entries"):
        write_vtk(path, UNIT, QUAD, point_data={"c": np.zeros(3)})
    with pytest.raises(ValueError, match="scalar or 2/3-vector"):
        write_vtk(path, UNIT, QUAD, point_data={"T": np.zeros((4, 5))})
    assert not path.exists()
