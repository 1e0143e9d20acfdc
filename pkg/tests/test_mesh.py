import numpy as np
import pytest

from twoscale.errors import MeshError
from twoscale.mesh import (BoundaryTag, Variant, build_cell_grid,
                           build_full_cell_grid, build_macro_grid,
                           classify_boundary)


def test_macro_grid_counts_and_geometry():
    g = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 3)
    assert g.num_cells == 64
    assert g.num_nodes == 81
    assert g.edge == pytest.approx(0.125)
    assert g.h == pytest.approx(0.125 * np.sqrt(2.0))
    assert g.area == pytest.approx(1.0)
    # counterclockwise quads: positive corner cross products
    p = g.vertices[g.cells]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 3] - p[:, 0]
    assert np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0)


def test_macro_grid_level_zero_is_single_cell():
    g = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 0)
    assert g.num_cells == 1
    assert g.num_nodes == 4
    assert len(g.boundary_faces) == 4


def test_macro_grid_rejects_bad_input():
    with pytest.raises(MeshError):
        build_macro_grid((0.0, 0.0), (1.0, 2.0), 2)  # not square
    with pytest.raises(MeshError):
        build_macro_grid((0.0, 0.0), (0.0, 0.0), 2)
    with pytest.raises(MeshError):
        build_macro_grid((0.0, 0.0), (1.0, 1.0), -1)


@pytest.mark.parametrize("r", [0, 1, 2])
def test_cross_cell_area_is_five_ninths(r):
    g = build_cell_grid(r)
    assert g.num_cells == 5 * 4 ** r
    assert g.area == pytest.approx(5.0 / 9.0, rel=1e-14)


def test_cross_cell_periodic_pairs_differ_by_unit_vector():
    g = build_cell_grid(2)
    offsets = g.vertices[g.periodic_pairs[:, 1]] - g.vertices[g.periodic_pairs[:, 0]]
    lengths = np.linalg.norm(offsets, axis=1)
    assert np.allclose(lengths, 1.0, atol=1e-14)
    aligned = np.isclose(np.abs(offsets), 1.0) | np.isclose(offsets, 0.0)
    assert aligned.all()
    # middle third of each face: 2^r + 1 nodes per face, two faces paired
    assert len(g.periodic_pairs) == 2 * (2 ** 2 + 1)


def test_cross_cell_avoids_unit_square_corners():
    g = build_cell_grid(1)
    v = g.vertices
    on_x = np.isclose(v[:, 0], 0.0) | np.isclose(v[:, 0], 1.0)
    on_y = np.isclose(v[:, 1], 0.0) | np.isclose(v[:, 1], 1.0)
    assert not np.any(on_x & on_y)


def test_cross_cell_boundary_tags_split_periodic_and_interior():
    g = build_cell_grid(1)
    tags = [t for faces in g.boundary_faces.values() for t in faces]
    assert BoundaryTag.CELL_PERIODIC in tags
    assert BoundaryTag.CELL_INTERIOR in tags
    # each face of the unit square contributes 2^r periodic edges
    n_periodic = sum(1 for faces in g.boundary_faces.values()
                     if BoundaryTag.CELL_PERIODIC in faces)
    assert n_periodic == 4 * 2


def test_full_cell_grid_is_unit_area_torus():
    g = build_full_cell_grid(1)
    assert g.area == pytest.approx(1.0, rel=1e-14)
    assert g.num_cells == 36
    # every boundary face is periodic, every slave pairs across one unit
    assert all(faces == (BoundaryTag.CELL_PERIODIC,)
               for faces in g.boundary_faces.values())
    offsets = g.vertices[g.periodic_pairs[:, 1]] - g.vertices[g.periodic_pairs[:, 0]]
    assert np.allclose(np.linalg.norm(offsets, axis=1), 1.0)
    assert len(g.periodic_pairs) == 2 * 6 + 1


def test_classify_mixed_variant_tags():
    g = classify_boundary(build_macro_grid((-0.5, -0.5), (0.5, 0.5), 2),
                          Variant.MIXED)
    elast_d = g.boundary_nodes(BoundaryTag.ELAST_DIRICHLET)
    diff_d = g.boundary_nodes(BoundaryTag.DIFF_DIRICHLET)
    # lateral faces clamp the displacement, the top face the concentration
    assert np.allclose(np.abs(g.vertices[elast_d][:, 0]), 0.5)
    assert np.allclose(g.vertices[diff_d][:, 1], 0.5)
    assert len(elast_d) == 2 * 5
    assert len(diff_d) == 5


def test_classify_pure_dirichlet_tags_every_face():
    g = classify_boundary(build_macro_grid((-0.5, -0.5), (0.5, 0.5), 2),
                          Variant.PURE_DIRICHLET)
    elast_d = g.boundary_nodes(BoundaryTag.ELAST_DIRICHLET)
    diff_d = g.boundary_nodes(BoundaryTag.DIFF_DIRICHLET)
    boundary = np.isclose(np.abs(g.vertices).max(axis=1), 0.5)
    assert len(elast_d) == len(diff_d) == boundary.sum()


def test_classify_rejects_periodic_grid():
    with pytest.raises(MeshError):
        classify_boundary(build_cell_grid(1), Variant.MIXED)
