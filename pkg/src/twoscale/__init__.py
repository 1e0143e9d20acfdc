"""Two-scale finite element simulator for transport in an elastically
deforming perforated medium.

The cell problems (periodic elasticity correctors and deformation-dependent
diffusion correctors) feed effective coefficients into a macroscopic
quasi-static elasticity / transient transport loop. Experiment drivers and
file emission live in `studies`, `reports`, `vtkio` and `cli`.
"""

from .config import RunConfig, parse_config, serialize_config, validate_config
from .diffusion_cell import (CellInfrastructure, EffectivePointValue,
                             effective_point, solve_diffusion_cells,
                             update_effective_field)
from .elastic_cell import (ElasticCellSolutions, Tensor4Sym,
                           effective_elasticity, isotropic_tensor,
                           solve_elastic_cells)
from .errors import (AssemblyError, ConfigError, DegenerateDeformation,
                     MeshError, SolverBreakdownError, SolverConvergenceError,
                     TwoScaleError)
from .kinematics import (CellCoefficientField, MacroGradientSample,
                         compute_F0, compute_J0_D0)
from .macro import (DisplacementProfile, HParams, MacroState, ProblemData,
                    SimulationResult, dirichlet_h, mass_observable,
                    push_forward, reconstruct_corrector, run_simulation)
from .mesh import (BoundaryTag, StructuredGrid, Variant, build_cell_grid,
                   build_macro_grid, classify_boundary)
from .problems import (CellSetup, MacroSetup, build_cell_setup,
                       build_macro_setup)
from .studies import (ConvergenceRecord, SweepRecord, SweepSpec,
                      estimated_orders, prolong_nodal, quadrature_norms,
                      run_convergence, run_sensitivity)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "BoundaryTag", "CellCoefficientField",
    "CellInfrastructure", "CellSetup", "ConfigError", "ConvergenceRecord",
    "DegenerateDeformation", "DisplacementProfile", "EffectivePointValue",
    "ElasticCellSolutions", "HParams", "MacroGradientSample", "MacroSetup",
    "MacroState", "MeshError", "ProblemData", "RunConfig",
    "SimulationResult", "SolverBreakdownError", "SolverConvergenceError",
    "StructuredGrid", "SweepRecord", "SweepSpec", "Tensor4Sym",
    "TwoScaleError", "Variant", "build_cell_grid", "build_cell_setup",
    "build_macro_grid", "build_macro_setup", "classify_boundary",
    "compute_F0", "compute_J0_D0", "dirichlet_h", "effective_elasticity",
    "effective_point", "estimated_orders", "isotropic_tensor",
    "mass_observable", "parse_config", "prolong_nodal", "push_forward",
    "quadrature_norms", "reconstruct_corrector", "run_convergence",
    "run_sensitivity", "run_simulation", "serialize_config",
    "solve_diffusion_cells", "solve_elastic_cells", "update_effective_field",
    "validate_config",
]
