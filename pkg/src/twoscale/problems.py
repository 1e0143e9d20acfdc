"""Wiring from a RunConfig to solver-ready objects.

Resolves the "auto" couplings (boundary-displacement profile and initial
concentration follow the boundary-condition variant), builds the grids,
solves the elastic cell problems once, and bundles everything a macroscopic
run needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .diffusion_cell import CellInfrastructure
from .elastic_cell import (ElasticCellSolutions, Tensor4Sym,
                           effective_elasticity, isotropic_tensor,
                           solve_elastic_cells)
from .macro import DisplacementProfile, HParams, ProblemData
from .mesh import StructuredGrid, Variant, build_cell_grid, build_macro_grid, classify_boundary


def variant_from(cfg: RunConfig) -> Variant:
    return Variant(cfg.variant)


def macro_grid_from(cfg: RunConfig) -> StructuredGrid:
    grid = build_macro_grid((cfg.macro_lower_x, cfg.macro_lower_y),
                            (cfg.macro_upper_x, cfg.macro_upper_y),
                            cfg.macro_refinement)
    return classify_boundary(grid, variant_from(cfg))


def cell_grid_from(cfg: RunConfig) -> StructuredGrid:
    return build_cell_grid(cfg.cell_refinement)


def material_tensor(cfg: RunConfig) -> Tensor4Sym:
    return isotropic_tensor(cfg.lam, cfg.mu)


def d_hat_matrix(cfg: RunConfig) -> np.ndarray:
    return np.array([[cfg.d_hat_11, cfg.d_hat_12],
                     [cfg.d_hat_12, cfg.d_hat_22]])


def resolve_h_profile(cfg: RunConfig) -> DisplacementProfile:
    """Mixed runs pull with a constant front; pure-Dirichlet runs need the
    parabolic profile so the clamped horizontal faces stay compatible."""
    if cfg.h_profile != "auto":
        return DisplacementProfile(cfg.h_profile)
    if variant_from(cfg) is Variant.PURE_DIRICHLET:
        return DisplacementProfile.PARABOLA
    return DisplacementProfile.CONSTANT_FRONT


def resolve_c0(cfg: RunConfig):
    """Initial concentration: mixed runs start empty and fill through the
    inflow face; pure-Dirichlet runs start saturated at the boundary value."""
    choice = cfg.c0
    if choice == "auto":
        choice = ("one" if variant_from(cfg) is Variant.PURE_DIRICHLET
                  else "zero")
    if choice == "one":
        return lambda xs: np.ones(len(xs))
    return None


@dataclass
class CellSetup:
    """Cell-level objects shared by every macroscopic solve of a run."""

    grid: StructuredGrid
    material: Tensor4Sym
    chi: ElasticCellSolutions
    a_star: Tensor4Sym
    d_hat: np.ndarray
    ys_area: float


def build_cell_setup(cfg: RunConfig) -> CellSetup:
    grid = cell_grid_from(cfg)
    material = material_tensor(cfg)
    chi = solve_elastic_cells(grid, material)
    a_star = effective_elasticity(chi, material, grid)
    ys_area = cfg.ys_area if cfg.ys_area > 0.0 else float(grid.area)
    return CellSetup(grid=grid, material=material, chi=chi, a_star=a_star,
                     d_hat=d_hat_matrix(cfg), ys_area=ys_area)


def build_problem_data(cfg: RunConfig, cell: CellSetup) -> ProblemData:
    h_params = HParams(amplitude=cfg.amplitude, frequency=cfg.frequency,
                       profile=resolve_h_profile(cfg))
    return ProblemData(a_star=cell.a_star, d_hat=cell.d_hat,
                       h_params=h_params, theta=cfg.theta, dt=cfg.dt,
                       ys_area=cell.ys_area, j_min=cfg.j_min,
                       c0=resolve_c0(cfg))


def build_infrastructure(cfg: RunConfig, cell: CellSetup) -> CellInfrastructure:
    return CellInfrastructure(cell.grid, cell.chi, cell.d_hat,
                              j_min=cfg.j_min, workers=cfg.workers,
                              quantization=cfg.quantization,
                              cache_enabled=cfg.cache_enabled)


@dataclass
class MacroSetup:
    """Everything run_simulation consumes, built from one RunConfig."""

    config: RunConfig
    cell: CellSetup
    macro_grid: StructuredGrid
    data: ProblemData
    infra: CellInfrastructure


def build_macro_setup(cfg: RunConfig, cell: CellSetup | None = None) -> MacroSetup:
    if cell is None:
        cell = build_cell_setup(cfg)
    return MacroSetup(config=cfg, cell=cell, macro_grid=macro_grid_from(cfg),
                      data=build_problem_data(cfg, cell),
                      infra=build_infrastructure(cfg, cell))
