"""Coupled macroscopic time loop: quasi-static elasticity, effective-field
updates, and the theta-scheme for the transport equation.

The coupling is one-sided by construction: the elasticity solve never sees
the concentration, while the transport coefficients J*, D* are rebuilt from
the displacement at every time level.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .diffusion_cell import CellInfrastructure, EffectiveFieldState, update_effective_field
from .elastic_cell import ElasticCellSolutions, Tensor4Sym
from .errors import MeshError, SolverConvergenceError
from .fem import (ConstraintSet, SparseOperator, apply_constraints,
                  assemble_diffusion, assemble_scalar_load,
                  assemble_elasticity, assemble_weighted_mass,
                  element_tables, shape_values, shape_reference_gradients,
                  solve)
from .mesh import BoundaryTag, StructuredGrid
from .solvers import PatternSolver

log = logging.getLogger(__name__)


class DisplacementProfile(enum.Enum):
    """Shape of the prescribed lateral boundary displacement."""

    CONSTANT_FRONT = "constant-front"
    PARABOLA = "parabola"


@dataclass(frozen=True)
class HParams:
    amplitude: float
    frequency: float
    profile: DisplacementProfile = DisplacementProfile.CONSTANT_FRONT

    def __post_init__(self):
        if self.frequency <= 0.0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")


def dirichlet_h(t: float, x, params: HParams) -> np.ndarray:
    """Prescribed boundary displacement h(t, x); h(0, x) = 0 by construction.

    Constant front: (sign(x1) a (1 - cos 2 pi f t)/2, 0) on the lateral
    faces. Parabola: the same pulled down by (0.25 - x2^2)/0.25 with the
    horizontal faces clamped to zero, for the unit-width square domain.
    """
    return dirichlet_h_many(t, np.asarray(x, dtype=float).reshape(1, 2), params)[0]


def dirichlet_h_many(t: float, xs: np.ndarray, params: HParams) -> np.ndarray:
    pull = params.amplitude * (1.0 - math.cos(2.0 * math.pi * params.frequency * t)) / 2.0
    out = np.zeros_like(xs)
    if params.profile is DisplacementProfile.CONSTANT_FRONT:
        out[:, 0] = np.sign(xs[:, 0]) * pull
    else:
        out[:, 0] = np.sign(xs[:, 0]) * pull * (0.25 - xs[:, 1] ** 2) / 0.25
        on_horizontal = np.abs(np.abs(xs[:, 1]) - 0.5) <= 1e-12
        out[on_horizontal, 0] = 0.0
    return out


@dataclass
class ProblemData:
    """All model data of one macroscopic run.

    Data functions receive (t, xs) with xs an (k, 2) array and return
    per-point values; `None` selects the model defaults (zero sources,
    unit Dirichlet concentration).
    """

    a_star: Tensor4Sym
    d_hat: np.ndarray
    h_params: HParams
    theta: float = 0.5
    dt: float = 0.05
    ys_area: float = 5.0 / 9.0
    j_min: float = 1e-8
    f_elast: object = None
    f_diff: object = None
    g: object = None
    c0: object = None

    def __post_init__(self):
        self.d_hat = np.asarray(self.d_hat, dtype=float)
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    def eval_g(self, t: float, xs: np.ndarray) -> np.ndarray:
        if self.g is None:
            return np.ones(len(xs))
        return np.asarray(self.g(t, xs), dtype=float)

    def eval_c0(self, xs: np.ndarray) -> np.ndarray:
        if self.c0 is None:
            return np.zeros(len(xs))
        return np.asarray(self.c0(xs), dtype=float)

    def eval_f_diff(self, t: float, xs: np.ndarray) -> np.ndarray:
        if self.f_diff is None:
            return np.zeros(len(xs))
        return np.asarray(self.f_diff(t, xs), dtype=float)

    def eval_f_elast(self, t: float, xs: np.ndarray) -> np.ndarray:
        if self.f_elast is None:
            return np.zeros((len(xs), 2))
        return np.asarray(self.f_elast(t, xs), dtype=float)


@dataclass
class MacroState:
    t: float
    u: np.ndarray  # (n_nodes, 2)
    c: np.ndarray  # (n_nodes,)


class ElasticSolver:
    """Quasi-static elasticity with time-dependent Dirichlet data.

    The Dirichlet dof set is fixed, so the reduced operator is factorized
    once and every time level costs one pair of triangular solves.
    """

    def __init__(self, grid: StructuredGrid, a_star: Tensor4Sym,
                 data: ProblemData):
        if not grid.has_tags():
            raise MeshError("macro grid must be classified before solving")
        self.grid = grid
        self.data = data
        op = assemble_elasticity(grid, a_star)
        self.dirichlet_nodes = grid.boundary_nodes(BoundaryTag.ELAST_DIRICHLET)
        cs = ConstraintSet(grid.num_nodes, dofs_per_node=2)
        for node in self.dirichlet_nodes:
            cs.add_dirichlet(int(node), 0.0, component=0)
            cs.add_dirichlet(int(node), 0.0, component=1)
        self.system = apply_constraints(op, np.zeros(2 * grid.num_nodes), cs)
        self.tab = element_tables(grid)

    def _boundary_values(self, t: float) -> np.ndarray:
        g0 = np.zeros(2 * self.grid.num_nodes)
        if self.dirichlet_nodes.size:
            xs = self.grid.vertices[self.dirichlet_nodes]
            vals = dirichlet_h_many(t, xs, self.data.h_params)
            g0[2 * self.dirichlet_nodes] = vals[:, 0]
            g0[2 * self.dirichlet_nodes + 1] = vals[:, 1]
        return g0

    def solve(self, t: float) -> np.ndarray:
        """Displacement at time t; never reads the concentration."""
        data = self.data
        rhs = np.zeros(2 * self.grid.num_nodes)
        if data.f_elast is not None:
            vals = np.stack([data.eval_f_elast(t, self.tab.points[:, q, :])
                             for q in range(len(self.tab.wdet))], axis=1)
            fe = np.einsum("q,qa,eqm->eam", self.tab.wdet, self.tab.N,
                           data.ys_area * vals)
            np.add.at(rhs, (2 * self.grid.cells[:, :, None]
                            + np.arange(2)[None, None, :]).ravel(), fe.ravel())
        g0 = self._boundary_values(t)
        reduced_rhs = self.system.reduce_rhs(rhs, g0)
        x_reduced = solve(self.system.operator, reduced_rhs, reuse=True)
        return self.system.expand(x_reduced, g0).reshape(-1, 2)


class DiffusionStepper:
    """theta-scheme for d/dt (J* c) - div(D* grad c) = J* f.

    One step solves
        (M^{k+1} + dt theta K^{k+1}) c^{k+1}
            = M^k c^k - dt (1-theta) K^k c^k + dt (theta F^{k+1} + (1-theta) F^k)
    with M the J*-weighted mass matrix, K the D* stiffness and F the
    J*-weighted load; Dirichlet data g is imposed at t^{k+1}.
    """

    def __init__(self, grid: StructuredGrid, data: ProblemData):
        if not grid.has_tags():
            raise MeshError("macro grid must be classified before stepping")
        self.grid = grid
        self.data = data
        self.tab = element_tables(grid)
        self.dirichlet_nodes = grid.boundary_nodes(BoundaryTag.DIFF_DIRICHLET)
        cs = ConstraintSet(grid.num_nodes, dofs_per_node=1)
        for node in self.dirichlet_nodes:
            cs.add_dirichlet(int(node), 0.0)
        self.constraints = cs
        self._solver = None
        self._pattern = None
        self._prev = None  # (t, M, K, F) of the previous level

    def _operators(self, t: float, eff: EffectiveFieldState):
        J, D = eff.as_quadrature_arrays(self.grid.num_cells, len(self.tab.wdet))
        M = assemble_weighted_mass(self.grid, J)
        K = assemble_diffusion(self.grid, D)
        if self.data.f_diff is None:
            F = np.zeros(self.grid.num_nodes)
        else:
            fvals = np.stack([self.data.eval_f_diff(t, self.tab.points[:, q, :])
                              for q in range(len(self.tab.wdet))], axis=1)
            F = assemble_scalar_load(self.grid, J * fvals)
        return M, K, F

    def _boundary_values(self, t: float) -> np.ndarray:
        g0 = np.zeros(self.grid.num_nodes)
        if self.dirichlet_nodes.size:
            xs = self.grid.vertices[self.dirichlet_nodes]
            g0[self.dirichlet_nodes] = self.data.eval_g(t, xs)
        return g0

    def step(self, state: MacroState, eff_k: EffectiveFieldState,
             eff_k1: EffectiveFieldState, t_next: float) -> np.ndarray:
        data = self.data
        dt, theta = data.dt, data.theta
        if self._prev is not None and self._prev[0] == state.t:
            M_k, K_k, F_k = self._prev[1:]
        else:
            M_k, K_k, F_k = self._operators(state.t, eff_k)
        M_k1, K_k1, F_k1 = self._operators(t_next, eff_k1)

        A = (M_k1.matrix + dt * theta * K_k1.matrix).tocsr()
        b = (M_k.matrix @ state.c - dt * (1.0 - theta) * (K_k.matrix @ state.c)
             + dt * (theta * F_k1 + (1.0 - theta) * F_k))

        sys_new = apply_constraints(SparseOperator(A), b, self.constraints)
        g0 = self._boundary_values(t_next)
        reduced = sys_new.reduce_rhs(b, g0)

        # the reduced pattern is fixed across steps: refresh only the values
        pattern = sys_new.operator.matrix.tocsc()
        pattern.sum_duplicates()
        pattern.sort_indices()
        if (self._solver is None
                or not np.array_equal(pattern.indices, self._pattern.indices)
                or not np.array_equal(pattern.indptr, self._pattern.indptr)):
            self._solver = PatternSolver(pattern)
            self._pattern = pattern
        self._solver.factor(pattern.data)
        if pattern.shape[0]:
            x_red = self._solver.solve(reduced)
            residual = np.linalg.norm(pattern @ x_red - reduced)
            if not residual <= 1e-10 * (1.0 + np.linalg.norm(reduced)):
                raise SolverConvergenceError(
                    f"transport step residual {residual:.3e} exceeds tolerance")
        else:
            x_red = np.zeros(0)
        c_next = sys_new.expand(x_red, g0)
        self._prev = (t_next, M_k1, K_k1, F_k1)
        return c_next


def mass_observable(grid: StructuredGrid, c: np.ndarray,
                    eff: EffectiveFieldState) -> float:
    """M(t) = int c J* dx by the assembly quadrature."""
    tab = element_tables(grid)
    J, _ = eff.as_quadrature_arrays(grid.num_cells, len(tab.wdet))
    c_at_q = np.einsum("cp,qp->cq", c[grid.cells], tab.N)
    return float(np.einsum("q,cq,cq->", tab.wdet, J, c_at_q))


def reconstruct_corrector(u: np.ndarray, macro_grid: StructuredGrid,
                          chi: ElasticCellSolutions, x_star, epsilon: float) -> np.ndarray:
    """Two-scale micro displacement near the lattice anchor x_star.

    Returns per cell-grid node m the truncated expansion
    u(x*) + eps sum_ij du_i/dx_j (x*) (y_j d_im + chi^ij_m(y)).
    """
    x_star = np.asarray(x_star, dtype=float)
    lo = np.array(macro_grid.lower)
    up = np.array(macro_grid.upper)
    if np.any(x_star < lo) or np.any(x_star > up):
        raise MeshError(f"anchor point {tuple(x_star)} lies outside the domain")
    frac = (x_star - lo) / macro_grid.edge
    ij = np.minimum(frac.astype(int), macro_grid.divisions - 1)
    cell_nodes = np.array([
        macro_grid.node_index[ij[0], ij[1]],
        macro_grid.node_index[ij[0] + 1, ij[1]],
        macro_grid.node_index[ij[0] + 1, ij[1] + 1],
        macro_grid.node_index[ij[0], ij[1] + 1]])
    local = 2.0 * (frac - ij) - 1.0
    N = shape_values(local)[0]
    G = shape_reference_gradients(local)[0] * (2.0 / macro_grid.edge)
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    u_corner = u[cell_nodes]
    u_star = N @ u_corner
    grad_u = np.einsum("pa,pb->ab", u_corner, G)

    y = chi.grid.vertices
    out = np.tile(u_star, (len(y), 1))
    for i in range(2):
        for j in range(2):
            out[:, i] += epsilon * grad_u[i, j] * y[:, j]
            out += epsilon * grad_u[i, j] * chi[(i, j)]
    return out


def push_forward(grid: StructuredGrid, state: MacroState):
    """Warp the macro grid by the displacement and carry c along.

    The concentration transforms by composition with the motion, so nodal
    values are reused verbatim on the warped mesh. Elements that invert
    under large displacements trigger a warning, not an abort.
    """
    warped = grid.vertices + state.u
    p = warped[grid.cells]
    # the bilinear Jacobian is linear in each reference coordinate, so it
    # is positive on the element iff positive at the four corners, where it
    # equals the cross product of the two incident edge vectors
    min_det = np.inf
    for k in range(4):
        e1 = p[:, (k + 1) % 4] - p[:, k]
        e2 = p[:, (k + 3) % 4] - p[:, k]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        min_det = min(min_det, float(np.min(det)))
    if min_det <= 0.0:
        log.warning("push-forward produced non-positive element Jacobian "
                    "(min corner determinant %.3e)", min_det)
    return warped, state.c.copy()


@dataclass
class SimulationResult:
    times: np.ndarray
    observables: np.ndarray  # columns: t, mass, c_min, c_max, u_max
    final_state: MacroState
    final_eff: EffectiveFieldState


OBSERVABLE_COLUMNS = ("t", "mass", "c_min", "c_max", "u_max")


def run_simulation(macro_grid: StructuredGrid, infra: CellInfrastructure,
                   data: ProblemData, t_end: float,
                   callback=None) -> SimulationResult:
    """Advance the one-sided coupled system from 0 to t_end.

    Per step: elasticity at t^{k+1}, effective coefficients from the new
    displacement, transport step, observables. `callback(state, eff)` runs
    once per accepted level including the initial one.
    """
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    steps = int(round(t_end / data.dt))
    if abs(steps * data.dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end {t_end} is not a multiple of dt {data.dt}")

    elastic = ElasticSolver(macro_grid, data.a_star, data)
    stepper = DiffusionStepper(macro_grid, data)

    u = elastic.solve(0.0)
    eff = update_effective_field(macro_grid, u, 0.0, infra)
    c = data.eval_c0(macro_grid.vertices)
    state = MacroState(t=0.0, u=u, c=c)

    def observe(state, eff):
        u_norm = float(np.sqrt((state.u ** 2).sum(axis=1)).max())
        return (state.t, mass_observable(macro_grid, state.c, eff),
                float(state.c.min()), float(state.c.max()), u_norm)

    rows = [observe(state, eff)]
    if callback is not None:
        callback(state, eff)

    for k in range(steps):
        t_next = (k + 1) * data.dt
        u_next = elastic.solve(t_next)
        eff_next = update_effective_field(macro_grid, u_next, t_next, infra)
        c_next = stepper.step(state, eff, eff_next, t_next)
        state = MacroState(t=t_next, u=u_next, c=c_next)
        eff = eff_next
        rows.append(observe(state, eff))
        if callback is not None:
            callback(state, eff)

    obs = np.array(rows)
    return SimulationResult(times=obs[:, 0], observables=obs,
                            final_state=state, final_eff=eff)
