"""Elasticity cell problems on the cross cell and the effective tensor.

Three periodic corrector fields chi_11, chi_12 (= chi_21) and chi_22 are
solved against the symmetrized unit strains; the effective elasticity
tensor follows by averaging the corrected stresses over the cell.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import SolverBreakdownError
from .fem import (ConstraintSet, apply_constraints, assemble_elasticity,
                  element_tables)
from .mesh import StructuredGrid

log = logging.getLogger(__name__)

MINOR_SYM_TOL = 1e-12
MAJOR_SYM_TOL = 1e-10

STRAIN_INDICES = ((0, 0), (0, 1), (1, 1))


class Tensor4Sym:
    """Fourth-order 2D elasticity tensor with minor and major symmetry.

    Positive definiteness on symmetric 2x2 matrices is validated through
    the eigenvalues of the 3x3 Kelvin representation.
    """

    def __init__(self, components: np.ndarray):
        A = np.asarray(components, dtype=float)
        if A.shape != (2, 2, 2, 2):
            raise ValueError(f"expected shape (2,2,2,2), got {A.shape}")
        scale = max(np.abs(A).max(), 1.0)
        if (np.abs(A - A.transpose(1, 0, 2, 3)).max() > MINOR_SYM_TOL * scale
                or np.abs(A - A.transpose(0, 1, 3, 2)).max() > MINOR_SYM_TOL * scale):
            raise ValueError("tensor lacks minor symmetry A_ijkl = A_jikl = A_ijlk")
        if np.abs(A - A.transpose(2, 3, 0, 1)).max() > MAJOR_SYM_TOL * scale:
            raise ValueError("tensor lacks major symmetry A_ijkl = A_klij")
        eigs = np.linalg.eigvalsh(self._kelvin(A))
        if eigs.min() <= 0.0:
            raise ValueError(
                f"tensor not positive on symmetric matrices (Kelvin eigenvalues {eigs})")
        self.components = A

    @staticmethod
    def _kelvin(A: np.ndarray) -> np.ndarray:
        r2 = np.sqrt(2.0)
        return np.array([
            [A[0, 0, 0, 0], A[0, 0, 1, 1], r2 * A[0, 0, 0, 1]],
            [A[1, 1, 0, 0], A[1, 1, 1, 1], r2 * A[1, 1, 0, 1]],
            [r2 * A[0, 1, 0, 0], r2 * A[0, 1, 1, 1], 2 * A[0, 1, 0, 1]],
        ])

    def kelvin_matrix(self) -> np.ndarray:
        return self._kelvin(self.components)

    def dyad_response(self, i: int, j: int, k: int, l: int) -> float:
        """Quadratic form B_ij : A : B_kl on unnormalized symmetric dyads.

        B_ij = e_i (x) e_j + e_j (x) e_i for i != j and e_i (x) e_i on the
        diagonal. Diagonal index pairs reproduce the plain components;
        shear pairs pick up a factor 4 relative to the tensor component.
        This is the normalization used when effective tensors are
        tabulated against a basis of unit symmetric matrices.
        """
        def basis(a, b):
            B = np.zeros((2, 2))
            B[a, b] = 1.0
            B[b, a] = 1.0
            return B

        return float(np.einsum("ij,ijkl,kl->", basis(i, j),
                               self.components, basis(k, l)))

    def __getitem__(self, idx):
        return self.components[idx]

    def apply(self, strain: np.ndarray) -> np.ndarray:
        """Contract against a 2x2 (stack of) strain matrices."""
        return np.einsum("ijkl,...kl->...ij", self.components, strain)


def isotropic_tensor(lam: float, mu: float) -> Tensor4Sym:
    """A_ijkl = mu (d_ik d_jl + d_il d_jk) + lam d_ij d_kl."""
    if mu <= 0.0 or lam < 0.0:
        raise ValueError(f"need mu > 0 and lambda >= 0, got mu={mu}, lambda={lam}")
    d = np.eye(2)
    A = (mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
         + lam * np.einsum("ij,kl->ijkl", d, d))
    return Tensor4Sym(A)


def unit_strain(i: int, j: int) -> np.ndarray:
    """Symmetrized dyad (e_i (x) e_j + e_j (x) e_i) / 2."""
    E = np.zeros((2, 2))
    E[i, j] += 0.5
    E[j, i] += 0.5
    return E


class ElasticCellSolutions:
    """Corrector displacement fields chi_ij on the cell grid.

    chi_21 is aliased to chi_12. Each field is periodic (paired nodes carry
    equal values) with zero componentwise mean over the cell.
    """

    def __init__(self, grid: StructuredGrid, fields: dict):
        self.grid = grid
        self.fields = dict(fields)
        self.fields[(1, 0)] = self.fields[(0, 1)]
        self._gradients = None
        self._gradient_stack = None

    def __getitem__(self, idx) -> np.ndarray:
        return self.fields[idx]

    def gradient_table(self) -> dict:
        """grad[c, q, a, b] = d chi_a / d y_b at each cell quadrature point."""
        if self._gradients is None:
            tab = element_tables(self.grid)
            conn = self.grid.cells
            self._gradients = {
                ij: np.einsum("cpa,qpb->cqab", self.fields[ij][conn], tab.G)
                for ij in STRAIN_INDICES
            }
            self._gradients[(1, 0)] = self._gradients[(0, 1)]
        return self._gradients

    def gradient_stack(self) -> np.ndarray:
        """Gradients stacked (3, nc, nq, 2, 2) in the order chi_11, chi_12, chi_22."""
        if self._gradient_stack is None:
            g = self.gradient_table()
            self._gradient_stack = np.ascontiguousarray(
                np.stack([g[ij] for ij in STRAIN_INDICES]))
        return self._gradient_stack


def solve_elastic_cells(cell_grid: StructuredGrid, A: Tensor4Sym) -> ElasticCellSolutions:
    """Solve the three periodic cell problems sharing one factorization.

    Each chi_ij satisfies the weak form of -div_y(A (E_ij + e_y(chi))) = 0
    with periodic boundary conditions and zero mean.
    """
    if not cell_grid.periodic_pairs.size:
        log.debug("cell grid has no periodic pairs; solving on a plain grid")
    tab = element_tables(cell_grid)
    op = assemble_elasticity(cell_grid, A)
    cs = ConstraintSet(cell_grid.num_nodes, dofs_per_node=2)
    cs.add_periodic_pairs(cell_grid.periodic_pairs)
    cs.set_mean_zero(tab.lumped_weights)
    system = apply_constraints(op, np.zeros(2 * cell_grid.num_nodes), cs)

    fields = {}
    for (i, j) in STRAIN_INDICES:
        sigma = A.apply(unit_strain(i, j))
        # load f[(p,m)] = -int (A E_ij)_{mb} dN_p/dy_b, equal on every cell
        fe = -np.einsum("q,mb,qpb->pm", tab.wdet, sigma, tab.G)
        f = np.zeros(2 * cell_grid.num_nodes)
        np.add.at(f, (2 * cell_grid.cells[:, :, None]
                      + np.arange(2)[None, None, :]).ravel(),
                  np.tile(fe.ravel(), cell_grid.num_cells))
        try:
            chi = system.solve(rhs=f)
        except SolverBreakdownError as exc:
            raise SolverBreakdownError(
                "elastic cell problem singular beyond the constant kernel; "
                "periodic pairing is likely broken") from exc
        fields[(i, j)] = chi.reshape(-1, 2)
    return ElasticCellSolutions(cell_grid, fields)


def effective_elasticity(chi: ElasticCellSolutions, A: Tensor4Sym,
                         cell_grid: StructuredGrid) -> Tensor4Sym:
    """Effective tensor A*_ijrs = sum_kl int A_ijkl (d_kr d_ls + e_y(chi_rs)_kl) dy.

    Discretization breaks exact major symmetry at roundoff level; the
    returned tensor is symmetrized and the asymmetry magnitude logged.
    """
    tab = element_tables(cell_grid)
    grads = chi.gradient_table()
    out = np.empty((2, 2, 2, 2))
    for (r, s) in STRAIN_INDICES:
        g = grads[(r, s)]
        strain_int = np.einsum("q,cqkl->kl", tab.wdet, 0.5 * (g + g.transpose(0, 1, 3, 2)))
        corr = np.einsum("ijkl,kl->ij", A.components, strain_int)
        out[:, :, r, s] = cell_grid.area * A.components[:, :, r, s] + corr
        out[:, :, s, r] = out[:, :, r, s]
    asym = np.abs(out - out.transpose(2, 3, 0, 1)).max()
    log.info("effective elasticity tensor major-symmetry defect: %.3e", asym)
    return Tensor4Sym(0.5 * (out + out.transpose(2, 3, 0, 1)))
