"""Leading-order deformation kinematics on the cell domain.

From one macroscopic displacement-gradient sample and the elastic cell
correctors, build the deformation gradient F0(y), its determinant J0 and
the transformed diffusion coefficient D0 = J0 F0^-1 D_hat F0^-T at every
cell quadrature point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elastic_cell import ElasticCellSolutions
from .errors import DegenerateDeformation
from .fem import element_tables
from .mesh import StructuredGrid

DEFAULT_J_MIN = 1e-8


@dataclass(frozen=True)
class MacroGradientSample:
    """Displacement gradient G = grad_x u at one (t, x_q)."""

    G: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "G", np.asarray(self.G, dtype=float).reshape(2, 2))

    @property
    def E(self) -> np.ndarray:
        """Symmetric part (G + G^T) / 2."""
        return 0.5 * (self.G + self.G.T)


@dataclass
class CellCoefficientField:
    """Per-quadrature-point kinematic fields on the cell grid.

    Arrays are indexed (cell, quad point, ...); J0 and D0 are filled by
    `compute_J0_D0`.
    """

    grid: StructuredGrid
    F0: np.ndarray
    J0: np.ndarray | None = None
    D0: np.ndarray | None = None


def compute_F0(sample: MacroGradientSample, chi: ElasticCellSolutions,
               cell_grid: StructuredGrid) -> CellCoefficientField:
    """F0 = I + grad_x u + sum_ij e_x(u)_ij grad_y chi_ij at cell quad points.

    Delegates to the batched kernel with a single slice so values are
    bitwise identical whether a sample is evaluated alone or in a batch.
    """
    F0 = compute_F0_block(sample.G[None], chi, cell_grid)[0]
    return CellCoefficientField(grid=cell_grid, F0=F0)


def compute_F0_block(Gs: np.ndarray, chi: ElasticCellSolutions,
                     cell_grid: StructuredGrid) -> np.ndarray:
    """F0 for a stack of gradient samples, shaped (B, nc, nq, 2, 2).

    Built from elementwise broadcasts only, so each slice is bitwise
    identical to the same sample computed in any other batch.
    """
    Gs = np.asarray(Gs, dtype=float).reshape(-1, 2, 2)
    Es = 0.5 * (Gs + Gs.transpose(0, 2, 1))
    g11, g12, g22 = chi.gradient_stack()

    def coeff(values):
        return values[:, None, None, None, None]

    F0 = coeff(Es[:, 0, 0]) * g11
    F0 += coeff(2.0 * Es[:, 0, 1]) * g12
    F0 += coeff(Es[:, 1, 1]) * g22
    F0 += np.eye(2) + Gs[:, None, None]
    return F0


def compute_J0_D0_block(F0s: np.ndarray, D_hat: np.ndarray,
                        j_min: float, ts, xqs,
                        cell_grid: StructuredGrid) -> tuple:
    """J0 and D0 for a stack of F0 fields; componentwise 2x2 algebra.

    Raises DegenerateDeformation for the lowest batch index whose
    determinant falls below j_min, reporting that sample's (t, x_q).
    """
    f00, f01 = F0s[..., 0, 0], F0s[..., 0, 1]
    f10, f11 = F0s[..., 1, 0], F0s[..., 1, 1]
    J = f00 * f11 - f01 * f10
    if np.any(J <= j_min):
        b, c, q = np.argwhere(J <= j_min)[0]
        y = element_tables(cell_grid).points[c, q]
        raise DegenerateDeformation(t=ts[b], x_q=tuple(xqs[b]), y=y,
                                    det_value=J[b, c, q])
    # closed-form 2x2 inverse: F^-1 = adj(F) / det, so
    # D0 = adj(F) D_hat adj(F)^T / det, written out componentwise
    d = np.asarray(D_hat, dtype=float)
    m00 = f11 * d[0, 0] - f01 * d[1, 0]
    m01 = f11 * d[0, 1] - f01 * d[1, 1]
    m10 = f00 * d[1, 0] - f10 * d[0, 0]
    m11 = f00 * d[1, 1] - f10 * d[0, 1]
    inv_j = 1.0 / J
    D0 = np.empty_like(F0s)
    D0[..., 0, 0] = (m00 * f11 - m01 * f01) * inv_j
    D0[..., 0, 1] = (m01 * f00 - m00 * f10) * inv_j
    D0[..., 1, 0] = (m10 * f11 - m11 * f01) * inv_j
    D0[..., 1, 1] = (m11 * f00 - m10 * f10) * inv_j
    return J, D0


def compute_J0_D0(field: CellCoefficientField, D_hat: np.ndarray,
                  j_min: float = DEFAULT_J_MIN, *, t: float = float("nan"),
                  x_q=(float("nan"), float("nan"))) -> CellCoefficientField:
    """Fill J0 = det F0 and D0 = J0 F0^-1 D_hat F0^-T.

    Raises DegenerateDeformation when J0 <= j_min anywhere, reporting the
    macroscopic time and point plus the offending cell location.
    """
    J, D0 = compute_J0_D0_block(field.F0[None], D_hat, j_min,
                                ts=[t], xqs=[x_q], cell_grid=field.grid)
    field.J0 = J[0]
    field.D0 = D0[0]
    return field
