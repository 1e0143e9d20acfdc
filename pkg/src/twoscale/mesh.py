"""Structured quadrilateral grids for the macro rectangle and the cross cell.

Both grid kinds live on a uniform square lattice. The macro grid covers an
axis-aligned square; the cell grid covers the cross-shaped solid part of the
unit cell,

    Y_s = ((1/3, 2/3) x (0, 1)) union ((0, 1) x (1/3, 2/3)),

built from five congruent squares of side 1/3 that are refined uniformly so
opposite periodic faces discretize identically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

COORD_TOL = 1e-12


class BoundaryTag(enum.Enum):
    ELAST_DIRICHLET = "elast_dirichlet"
    ELAST_NEUMANN = "elast_neumann"
    DIFF_DIRICHLET = "diff_dirichlet"
    DIFF_NEUMANN = "diff_neumann"
    CELL_INTERIOR = "cell_interior"
    CELL_PERIODIC = "cell_periodic"


class Variant(enum.Enum):
    """Boundary-condition layout of the macroscopic problem."""

    MIXED = "mixed"
    PURE_DIRICHLET = "pure-dirichlet"


@dataclass(frozen=True, eq=False)
class StructuredGrid:
    """Uniform axis-aligned quadrilateral mesh.

    Attributes
    ----------
    vertices : (n_nodes, 2) float array
    cells : (n_cells, 4) int array
        Vertex indices in counterclockwise order, so the element Jacobian
        determinant is positive.
    boundary_faces : dict
        Maps a sorted vertex-index pair (a, b) to a tuple of BoundaryTag,
        one tag per subproblem defined on the grid.
    periodic_pairs : (n_pairs, 2) int array
        (master, slave) node pairs; each slave coordinate equals its master
        coordinate plus one unit lattice vector.
    h : float
        Mesh size, defined as the cell diagonal.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_faces: dict
    periodic_pairs: np.ndarray
    h: float
    edge: float
    lower: tuple
    upper: tuple
    divisions: int
    node_index: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def area(self) -> float:
        """Sum of cell areas (all cells are squares of the same edge)."""
        return self.num_cells * self.edge * self.edge

    def cell_area(self) -> float:
        return self.edge * self.edge

    def boundary_nodes(self, tag: BoundaryTag) -> np.ndarray:
        """Sorted indices of nodes incident to a face carrying `tag`."""
        nodes = set()
        for (a, b), tags in self.boundary_faces.items():
            if tag in tags:
                nodes.add(a)
                nodes.add(b)
        return np.array(sorted(nodes), dtype=np.int64)

    def has_tags(self) -> bool:
        return any(len(t) > 0 for t in self.boundary_faces.values())


def _boundary_edges(cells: np.ndarray) -> list:
    """Edges that belong to exactly one cell, as sorted index pairs."""
    count: dict = {}
    for quad in cells:
        for k in range(4):
            a, b = quad[k], quad[(k + 1) % 4]
            key = (min(a, b), max(a, b))
            count[key] = count.get(key, 0) + 1
    return [e for e, c in count.items() if c == 1]


def build_macro_grid(lower, upper, refinement: int) -> StructuredGrid:
    """Uniformly refined square grid on the rectangle [lower, upper].

    Refinement level 0 is a single cell; level r has 4**r cells. The
    rectangle must be a square since all cells are required to be
    axis-aligned squares of identical edge length.
    """
    lower = (float(lower[0]), float(lower[1]))
    upper = (float(upper[0]), float(upper[1]))
    if not (lower[0] < upper[0] and lower[1] < upper[1]):
        raise MeshError(f"lower {lower} must be strictly below upper {upper}")
    if refinement < 0 or int(refinement) != refinement:
        raise MeshError(f"refinement must be a nonnegative integer, got {refinement}")
    span = (upper[0] - lower[0], upper[1] - lower[1])
    if abs(span[0] - span[1]) > COORD_TOL * max(span):
        raise MeshError(f"domain must be square for uniform square cells, got spans {span}")

    n = 2 ** int(refinement)
    edge = span[0] / n
    xs = lower[0] + edge * np.arange(n + 1)
    ys = lower[1] + edge * np.arange(n + 1)
    # node id = iy * (n+1) + ix
    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])
    node_index = (np.arange((n + 1) * (n + 1), dtype=np.int64)
                  .reshape(n + 1, n + 1).T.copy())  # [ix, iy]

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = node_index[ix.ravel(), iy.ravel()]
    v10 = node_index[ix.ravel() + 1, iy.ravel()]
    v11 = node_index[ix.ravel() + 1, iy.ravel() + 1]
    v01 = node_index[ix.ravel(), iy.ravel() + 1]
    cells = np.column_stack([v00, v10, v11, v01]).astype(np.int64)

    boundary_faces = {e: () for e in _boundary_edges(cells)}
    return StructuredGrid(
        vertices=vertices, cells=cells, boundary_faces=boundary_faces,
        periodic_pairs=np.empty((0, 2), dtype=np.int64),
        h=edge * math.sqrt(2.0), edge=edge,
        lower=lower, upper=upper, divisions=n, node_index=node_index,
    )


def build_cell_grid(refinement: int) -> StructuredGrid:
    """Cross-shaped cell grid with periodic node pairing.

    The level-0 mesh is the five squares of side 1/3 composing the cross;
    level r splits each into 4**r. Nodes on {y1=0} are paired with {y1=1}
    and {y2=0} with {y2=1}; all remaining boundary faces separate the solid
    from the perforation.
    """
    if refinement < 0 or int(refinement) != refinement:
        raise MeshError(f"refinement must be a nonnegative integer, got {refinement}")
    n = 2 ** int(refinement)
    L = 3 * n  # lattice intervals per unit length
    edge = (1.0 / 3.0) / n

    i, j = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
    in_cross = ((i >= n) & (i < 2 * n)) | ((j >= n) & (j < 2 * n))

    # nodes touched by at least one cross cell
    node_used = np.zeros((L + 1, L + 1), dtype=bool)
    ci, cj = np.nonzero(in_cross)
    for di in (0, 1):
        for dj in (0, 1):
            node_used[ci + di, cj + dj] = True

    node_index = np.full((L + 1, L + 1), -1, dtype=np.int64)
    # number nodes in (iy outer, ix inner) order to match the macro grid
    order_i, order_j = np.nonzero(node_used.T)  # order_i = iy, order_j = ix
    node_index[order_j, order_i] = np.arange(order_i.size)
    vertices = np.column_stack([order_j * edge, order_i * edge]).astype(float)

    v00 = node_index[ci, cj]
    v10 = node_index[ci + 1, cj]
    v11 = node_index[ci + 1, cj + 1]
    v01 = node_index[ci, cj + 1]
    # cell order: iy outer, ix inner
    order = np.lexsort((ci, cj))
    cells = np.column_stack([v00, v10, v11, v01])[order].astype(np.int64)

    # no node may sit on two distinct faces of the unit square: the cross
    # meets each face only on its middle third, so corners never occur
    on_face = ((order_j == 0).astype(int) + (order_j == L)
               + (order_i == 0) + (order_i == L))
    if np.any(on_face > 1):
        raise MeshError("cell geometry puts a node on two unit-square faces; "
                        "periodic pairing would be ambiguous")

    pairs = []
    coords = {tuple(np.round(v / edge).astype(int)): idx
              for idx, v in enumerate(vertices)}
    for idx in np.nonzero((order_j == L) | (order_i == L))[0]:
        ix, iy = int(order_j[idx]), int(order_i[idx])
        shift = (L, 0) if ix == L else (0, L)
        master_key = (ix - shift[0], iy - shift[1])
        if master_key not in coords:
            raise MeshError(f"periodic master missing for slave node at "
                            f"({ix * edge}, {iy * edge})")
        master = coords[master_key]
        slave = int(node_index[ix, iy])
        # pairing is by coordinate match: slave = master + unit vector
        offset = vertices[slave] - vertices[master]
        expect = np.array([1.0, 0.0]) if ix == L else np.array([0.0, 1.0])
        if np.max(np.abs(offset - expect)) > COORD_TOL:
            raise MeshError("periodic pair does not differ by a unit lattice vector")
        pairs.append((master, slave))
    periodic_pairs = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    boundary_faces = {}
    for (a, b) in _boundary_edges(cells):
        pa, pb = vertices[a], vertices[b]
        periodic = False
        for axis in (0, 1):
            for val in (0.0, 1.0):
                if (abs(pa[axis] - val) <= COORD_TOL
                        and abs(pb[axis] - val) <= COORD_TOL):
                    periodic = True
        boundary_faces[(a, b)] = ((BoundaryTag.CELL_PERIODIC,) if periodic
                                  else (BoundaryTag.CELL_INTERIOR,))

    return StructuredGrid(
        vertices=vertices, cells=cells, boundary_faces=boundary_faces,
        periodic_pairs=periodic_pairs,
        h=edge * math.sqrt(2.0), edge=edge,
        lower=(0.0, 0.0), upper=(1.0, 1.0), divisions=L, node_index=node_index,
    )


def build_full_cell_grid(refinement: int) -> StructuredGrid:
    """Unperforated unit cell: the full square [0, 1]^2 with periodic pairing.

    Matches the cross grid's resolution at equal refinement (3 * 2^r
    intervals per unit length). Corner slaves chain through two pairings,
    e.g. (1, 1) -> (0, 1) -> (0, 0); constraint resolution follows chains.
    """
    if refinement < 0 or int(refinement) != refinement:
        raise MeshError(f"refinement must be a nonnegative integer, got {refinement}")
    L = 3 * 2 ** int(refinement)
    edge = 1.0 / L
    xs = edge * np.arange(L + 1)
    xg, yg = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])
    node_index = (np.arange((L + 1) * (L + 1), dtype=np.int64)
                  .reshape(L + 1, L + 1).T.copy())
    ix, iy = np.meshgrid(np.arange(L), np.arange(L), indexing="xy")
    cells = np.column_stack([
        node_index[ix.ravel(), iy.ravel()],
        node_index[ix.ravel() + 1, iy.ravel()],
        node_index[ix.ravel() + 1, iy.ravel() + 1],
        node_index[ix.ravel(), iy.ravel() + 1]]).astype(np.int64)

    pairs = [(int(node_index[0, iy]), int(node_index[L, iy]))
             for iy in range(L + 1)]
    pairs.extend((int(node_index[ix, 0]), int(node_index[ix, L]))
                 for ix in range(L))
    periodic_pairs = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    boundary_faces = {e: (BoundaryTag.CELL_PERIODIC,)
                      for e in _boundary_edges(cells)}
    return StructuredGrid(
        vertices=vertices, cells=cells, boundary_faces=boundary_faces,
        periodic_pairs=periodic_pairs,
        h=edge * math.sqrt(2.0), edge=edge,
        lower=(0.0, 0.0), upper=(1.0, 1.0), divisions=L, node_index=node_index,
    )


def classify_boundary(grid: StructuredGrid, variant: Variant) -> StructuredGrid:
    """Tag macro boundary faces for the elasticity and diffusion problems.

    Mixed layout: the lateral faces x1 = +-1/2 carry the elastic Dirichlet
    data and the top face x2 = +1/2 the diffusion Dirichlet data; everything
    else is zero-flux. Pure Dirichlet tags every face for both problems.
    """
    if grid.periodic_pairs.size:
        raise MeshError("cannot classify a periodic cell grid as a macro grid")

    lo, up = grid.lower, grid.upper
    tagged = {}
    for (a, b) in grid.boundary_faces:
        pa, pb = grid.vertices[a], grid.vertices[b]
        mid = 0.5 * (pa + pb)
        on_left = abs(mid[0] - lo[0]) <= COORD_TOL
        on_right = abs(mid[0] - up[0]) <= COORD_TOL
        on_top = abs(mid[1] - up[1]) <= COORD_TOL
        if variant is Variant.PURE_DIRICHLET:
            tags = (BoundaryTag.ELAST_DIRICHLET, BoundaryTag.DIFF_DIRICHLET)
        else:
            elast = (BoundaryTag.ELAST_DIRICHLET if (on_left or on_right)
                     else BoundaryTag.ELAST_NEUMANN)
            diff = BoundaryTag.DIFF_DIRICHLET if on_top else BoundaryTag.DIFF_NEUMANN
            tags = (elast, diff)
        tagged[(a, b)] = tags

    return StructuredGrid(
        vertices=grid.vertices, cells=grid.cells, boundary_faces=tagged,
        periodic_pairs=grid.periodic_pairs, h=grid.h, edge=grid.edge,
        lower=grid.lower, upper=grid.upper, divisions=grid.divisions,
        node_index=grid.node_index,
    )
