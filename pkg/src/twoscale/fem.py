"""Q1 finite-element machinery on uniform square grids.

Provides 2x2 Gauss quadrature, vectorized assembly of diffusion stiffness,
elasticity stiffness and weighted mass matrices, constraint handling
(Dirichlet, periodic, zero weighted mean) by symmetric elimination, and
direct solves with factorization reuse.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SolverBreakdownError, SolverConvergenceError
from .mesh import StructuredGrid
from .solvers import PatternSolver

RESIDUAL_TOL = 1e-10
SPD_EIG_FLOOR = 1e-14


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference square [-1, 1]^2."""

    points: np.ndarray   # (nq, 2)
    weights: np.ndarray  # (nq,)


def gauss_2x2() -> QuadratureRule:
    """2x2 Gauss rule; exact for products of bilinear functions."""
    g = 1.0 / math.sqrt(3.0)
    pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
    return QuadratureRule(points=pts, weights=np.ones(4))


def shape_values(points: np.ndarray) -> np.ndarray:
    """N[q, a]: bilinear basis a at reference point q (CCW vertex order)."""
    points = np.atleast_2d(points)
    xi, eta = points[:, 0], points[:, 1]
    return 0.25 * np.column_stack([
        (1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
        (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])


def shape_reference_gradients(points: np.ndarray) -> np.ndarray:
    """dN[q, a, d]: reference-coordinate gradients of the bilinear basis."""
    points = np.atleast_2d(points)
    xi, eta = points[:, 0], points[:, 1]
    d = np.empty((points.shape[0], 4, 2))
    d[:, 0, 0] = -(1 - eta); d[:, 0, 1] = -(1 - xi)
    d[:, 1, 0] = (1 - eta);  d[:, 1, 1] = -(1 + xi)
    d[:, 2, 0] = (1 + eta);  d[:, 2, 1] = (1 + xi)
    d[:, 3, 0] = -(1 + eta); d[:, 3, 1] = (1 - xi)
    return 0.25 * d


class ElementTables:
    """Per-grid quadrature tables; identical for every cell of a uniform grid.

    Attributes
    ----------
    N : (nq, 4) basis values
    G : (nq, 4, 2) physical basis gradients
    wdet : (nq,) quadrature weight times Jacobian determinant
    points : (n_cells, nq, 2) physical quadrature-point coordinates
    """

    def __init__(self, grid: StructuredGrid, rule: QuadratureRule | None = None):
        rule = rule or gauss_2x2()
        self.rule = rule
        self.N = shape_values(rule.points)
        # affine map: x = v00 + (xi+1)/2 * edge, so dx/dxi = edge/2
        scale = 2.0 / grid.edge
        self.G = shape_reference_gradients(rule.points) * scale
        det = (grid.edge / 2.0) ** 2
        self.wdet = rule.weights * det
        v00 = grid.vertices[grid.cells[:, 0]]
        local = (rule.points + 1.0) * (grid.edge / 2.0)
        self.points = v00[:, None, :] + local[None, :, :]
        # nodal quadrature weights of the basis functions: int N_a = area/4
        w = np.zeros(grid.num_nodes)
        np.add.at(w, grid.cells.ravel(),
                  np.repeat(grid.cell_area() / 4.0, grid.cells.size))
        self.lumped_weights = w
        # static contraction tables so per-coefficient assembly reduces to
        # one matrix product over cells (the hot path of cell problems):
        #   K_e[a,b]  = D0[q,i,j] . stiff_contraction[(q,i,j),(a,b)]
        #   f_e[a,m]  = D0[q,m,b] . load_contraction[a,(q,b)]
        #   grad u[q,k] = u[p] . grad_contraction[p,(q,k)]
        self.stiff_contraction = np.einsum(
            "q,qai,qbj->qijab", self.wdet, self.G, self.G).reshape(-1, 16)
        self.load_contraction = (self.wdet[:, None, None]
                                 * self.G).transpose(1, 0, 2).reshape(4, -1)
        self.grad_contraction = np.ascontiguousarray(
            self.G.transpose(1, 0, 2).reshape(4, -1))


_tables_cache: "weakref.WeakKeyDictionary[StructuredGrid, ElementTables]" = \
    weakref.WeakKeyDictionary()
_scatter_cache: "weakref.WeakKeyDictionary[StructuredGrid, dict]" = \
    weakref.WeakKeyDictionary()


def element_tables(grid: StructuredGrid) -> ElementTables:
    tab = _tables_cache.get(grid)
    if tab is None:
        tab = ElementTables(grid)
        _tables_cache[grid] = tab
    return tab


def scatter_indices(grid: StructuredGrid, dofs_per_node: int):
    """COO (rows, cols) arrays for element-matrix scattering."""
    per_grid = _scatter_cache.setdefault(grid, {})
    if dofs_per_node not in per_grid:
        conn = grid.cells
        if dofs_per_node == 1:
            dofs = conn
        else:
            dofs = (dofs_per_node * conn[:, :, None]
                    + np.arange(dofs_per_node)[None, None, :]).reshape(
                        conn.shape[0], 4 * dofs_per_node)
        k = dofs.shape[1]
        rows = np.repeat(dofs, k, axis=1).ravel()
        cols = np.tile(dofs, (1, k)).ravel()
        per_grid[dofs_per_node] = (rows, cols)
    return per_grid[dofs_per_node]


@dataclass
class SolveStats:
    factorizations: int = 0
    solves: int = 0
    iterations: int = 0


class SparseOperator:
    """Symmetric sparse operator with an optional cached factorization."""

    def __init__(self, matrix: sp.spmatrix):
        self.matrix = matrix.tocsr()
        self.stats = SolveStats()
        self._solver: PatternSolver | None = None

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other

    def factorization(self, reuse: bool = True) -> PatternSolver:
        if self._solver is None or not reuse:
            self._solver = PatternSolver(self.matrix.tocsc())
            self._solver.factor()
            self.stats.factorizations += 1
        return self._solver


def _min_eig_2x2(mats: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the symmetric part of stacked 2x2 matrices."""
    a = mats[..., 0, 0]
    d = mats[..., 1, 1]
    b = 0.5 * (mats[..., 0, 1] + mats[..., 1, 0])
    mid = 0.5 * (a + d)
    rad = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b ** 2, 0.0))
    return mid - rad


def _coefficient_array(grid, tab, coeff, shape_suffix):
    """Evaluate a per-(element, quad point) coefficient into an array."""
    target = (grid.num_cells, len(tab.wdet)) + shape_suffix
    if callable(coeff):
        out = np.empty(target)
        for e in range(grid.num_cells):
            for q in range(len(tab.wdet)):
                out[e, q] = coeff(e, q)
        return out
    out = np.asarray(coeff, dtype=float)
    if out.shape != target:
        out = np.broadcast_to(out, target).copy()
    return out


def assemble_diffusion(grid: StructuredGrid, coeff) -> SparseOperator:
    """Galerkin matrix of (coeff grad phi_j) . grad phi_i.

    `coeff` is a callable (element, quad point) -> 2x2 SPD matrix, or an
    array broadcastable to (n_cells, nq, 2, 2). The first location with a
    non-SPD value is reported.
    """
    tab = element_tables(grid)
    D = _coefficient_array(grid, tab, coeff, (2, 2))
    lam_min = _min_eig_2x2(D)
    if np.any(lam_min <= SPD_EIG_FLOOR):
        e, q = np.argwhere(lam_min <= SPD_EIG_FLOOR)[0]
        raise AssemblyError(
            f"diffusion coefficient not SPD at element {e}, quad point {q}: "
            f"min eigenvalue {lam_min[e, q]:.3e}", element=int(e), quad_point=int(q))
    ke = np.einsum("q,qai,eqij,qbj->eab", tab.wdet, tab.G, D, tab.G,
                   optimize=True)
    rows, cols = scatter_indices(grid, 1)
    n = grid.num_nodes
    mat = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return SparseOperator(mat)


def assemble_elasticity(grid: StructuredGrid, tensor) -> SparseOperator:
    """Stiffness matrix of the form int A e(u) : e(v) with constant A.

    Unknowns are interleaved per node: (u1_0, u2_0, u1_1, u2_1, ...).
    By the minor symmetry of A the strain e(u) may be replaced by the full
    gradient, giving entries sum_{j,l} A[a,j,b,l] dN_q/dx_l dN_p/dx_j.
    """
    A = np.asarray(getattr(tensor, "components", tensor), dtype=float)
    tab = element_tables(grid)
    ke = np.einsum("q,qpj,ajbl,qnl->panb", tab.wdet, tab.G, A, tab.G,
                   optimize=True).reshape(8, 8)
    rows, cols = scatter_indices(grid, 2)
    vals = np.tile(ke.ravel(), grid.num_cells)
    n = 2 * grid.num_nodes
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return SparseOperator(mat)


def assemble_weighted_mass(grid: StructuredGrid, weight) -> SparseOperator:
    """Mass matrix with entries int weight phi_i phi_j; weight must be > 0."""
    tab = element_tables(grid)
    W = _coefficient_array(grid, tab, weight, ())
    if np.any(W <= 0.0):
        e, q = np.argwhere(W <= 0.0)[0]
        raise AssemblyError(
            f"mass weight not positive at element {e}, quad point {q}: "
            f"value {W[e, q]:.3e}", element=int(e), quad_point=int(q))
    me = np.einsum("q,qa,qb,eq->eab", tab.wdet, tab.N, tab.N, W,
                   optimize=True)
    rows, cols = scatter_indices(grid, 1)
    n = grid.num_nodes
    mat = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return SparseOperator(mat)


def assemble_scalar_load(grid: StructuredGrid, value) -> np.ndarray:
    """Load vector f_p = int value(x) phi_p, value sampled at quad points."""
    tab = element_tables(grid)
    V = _coefficient_array(grid, tab, value, ())
    fe = np.einsum("q,qa,eq->ea", tab.wdet, tab.N, V)
    f = np.zeros(grid.num_nodes)
    np.add.at(f, grid.cells.ravel(), fe.ravel())
    return f


class ConstraintSet:
    """Dirichlet, periodic and mean-zero constraints on a nodal field.

    Each node carries `dofs_per_node` unknowns. A dof may appear in at most
    one constraint category.
    """

    def __init__(self, num_nodes: int, dofs_per_node: int = 1):
        self.num_nodes = num_nodes
        self.dofs_per_node = dofs_per_node
        self.dirichlet: dict[int, float] = {}
        self.slave_to_master: dict[int, int] = {}
        self.mean_zero = False
        self.mean_weights: np.ndarray | None = None

    @property
    def num_dofs(self) -> int:
        return self.num_nodes * self.dofs_per_node

    def add_dirichlet(self, node: int, value: float, component: int = 0):
        dof = node * self.dofs_per_node + component
        old = self.dirichlet.get(dof)
        if old is not None and old != value:
            raise AssemblyError(
                f"conflicting Dirichlet values at node {node} component "
                f"{component}: {old} vs {value}")
        if dof in self.slave_to_master:
            raise AssemblyError(f"dof {dof} is both periodic slave and Dirichlet")
        self.dirichlet[dof] = float(value)

    def add_periodic_pairs(self, pairs: np.ndarray):
        for master, slave in np.asarray(pairs, dtype=np.int64).reshape(-1, 2):
            for c in range(self.dofs_per_node):
                sdof = int(slave) * self.dofs_per_node + c
                mdof = int(master) * self.dofs_per_node + c
                if sdof in self.dirichlet:
                    raise AssemblyError(f"dof {sdof} is both periodic slave and Dirichlet")
                self.slave_to_master[sdof] = mdof

    def set_mean_zero(self, nodal_weights: np.ndarray):
        """Constrain each component's weighted mean over the domain to zero."""
        if self.dirichlet:
            raise AssemblyError("mean-zero and Dirichlet constraints cannot be combined")
        self.mean_zero = True
        self.mean_weights = np.asarray(nodal_weights, dtype=float)

    def _resolve_master(self, dof: int) -> int:
        seen = set()
        while dof in self.slave_to_master:
            if dof in seen:
                raise AssemblyError("cyclic periodic constraints")
            seen.add(dof)
            dof = self.slave_to_master[dof]
        return dof


class ConstrainedSystem:
    """Reduced linear system produced by `apply_constraints`.

    The change of variables is x = P x_r + g0 with a selection matrix P, so
    the reduced operator is P^T K P and the reduced right-hand side
    P^T (f - K g0); this keeps the operator symmetric positive definite.
    """

    def __init__(self, operator: SparseOperator, rhs: np.ndarray,
                 P: sp.spmatrix, g0: np.ndarray, constraints: ConstraintSet,
                 full_operator: SparseOperator):
        self.operator = operator
        self.rhs = rhs
        self.P = P
        self.g0 = g0
        self.constraints = constraints
        self.full_operator = full_operator

    def reduce_rhs(self, rhs: np.ndarray, g0: np.ndarray | None = None) -> np.ndarray:
        g0 = self.g0 if g0 is None else g0
        if np.any(g0):
            rhs = rhs - self.full_operator.matrix @ g0
        return self.P.T @ rhs

    def expand(self, x_reduced: np.ndarray, g0: np.ndarray | None = None) -> np.ndarray:
        x = self.P @ x_reduced + (self.g0 if g0 is None else g0)
        cs = self.constraints
        if cs.mean_zero:
            w = cs.mean_weights
            total = w.sum()
            dpn = cs.dofs_per_node
            for c in range(dpn):
                comp = x[c::dpn]
                comp -= (w @ comp) / total
        return x

    def solve(self, rhs: np.ndarray | None = None, reuse: bool = True,
              method: str = "direct") -> np.ndarray:
        rr = self.rhs if rhs is None else self.reduce_rhs(rhs)
        xr = solve(self.operator, rr, reuse=reuse, method=method)
        return self.expand(xr)


def build_transformation(constraints: ConstraintSet):
    """Selection matrix P, offset g0 and the pinned dof, if any."""
    n = constraints.num_dofs
    eliminated = set(constraints.dirichlet)
    eliminated.update(constraints.slave_to_master)

    pinned = None
    if constraints.mean_zero:
        # pin the lowest unconstrained dof of each component; the solution
        # is shifted to exact zero weighted mean afterwards
        pinned = []
        for c in range(constraints.dofs_per_node):
            for dof in range(c, n, constraints.dofs_per_node):
                if dof not in eliminated:
                    pinned.append(dof)
                    eliminated.add(dof)
                    break

    red = np.full(n, -1, dtype=np.int64)
    free = [d for d in range(n) if d not in eliminated]
    red[free] = np.arange(len(free))

    g0 = np.zeros(n)
    rows, cols = list(free), list(range(len(free)))
    for dof, val in constraints.dirichlet.items():
        g0[dof] = val
    for sdof in constraints.slave_to_master:
        mdof = constraints._resolve_master(sdof)
        if mdof in constraints.dirichlet:
            g0[sdof] = constraints.dirichlet[mdof]
        elif pinned and mdof in pinned:
            pass  # slave of a pinned master stays at the pin value 0
        else:
            rows.append(sdof)
            cols.append(red[mdof])
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, len(free)))
    return P, g0, red, pinned


def apply_constraints(op: SparseOperator, rhs: np.ndarray,
                      constraints: ConstraintSet) -> ConstrainedSystem:
    """Condense periodic slaves, eliminate Dirichlet dofs symmetrically,
    and pin one dof per component when a mean-zero constraint is active."""
    if op.shape[0] != constraints.num_dofs:
        raise AssemblyError(
            f"operator size {op.shape[0]} does not match constraint "
            f"dof count {constraints.num_dofs}")
    P, g0, _, _ = build_transformation(constraints)
    K = op.matrix
    reduced = SparseOperator((P.T @ K @ P).tocsr())
    b = rhs - K @ g0 if np.any(g0) else rhs
    rhs_reduced = P.T @ b
    return ConstrainedSystem(reduced, rhs_reduced, P, g0, constraints, op)


def solve(op: SparseOperator, rhs: np.ndarray, reuse: bool = True,
          method: str = "direct") -> np.ndarray:
    """Solve op x = rhs to a residual of 1e-10 * (1 + |rhs|).

    With `reuse` the cached factorization is used when present; `method`
    may be "cg" for a conjugate-gradient fallback on large systems.
    """
    rhs = np.asarray(rhs, dtype=float)
    if op.shape[0] == 0:
        return np.zeros(0)
    if method == "direct":
        x = op.factorization(reuse=reuse).solve(rhs)
    elif method == "cg":
        count = [0]

        def _cb(_):
            count[0] += 1

        x, info = spla.cg(op.matrix, rhs, rtol=RESIDUAL_TOL, atol=0.0,
                          maxiter=20 * op.shape[0], callback=_cb)
        op.stats.iterations += count[0]
        if info < 0:
            raise SolverBreakdownError(f"conjugate gradient breakdown (info={info})")
        if info > 0:
            raise SolverConvergenceError(
                f"conjugate gradient did not converge in {info} iterations")
    else:
        raise ValueError(f"unknown solve method {method!r}")
    op.stats.solves += 1
    residual = np.linalg.norm(op.matrix @ x - rhs)
    if not residual <= RESIDUAL_TOL * (1.0 + np.linalg.norm(rhs)):
        raise SolverConvergenceError(
            f"direct solve residual {residual:.3e} exceeds tolerance")
    return x
