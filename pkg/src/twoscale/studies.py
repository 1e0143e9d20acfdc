"""Experiment drivers: grid-convergence studies and parameter sweeps.

The convergence study refines the macroscopic grid cycle by cycle while the
cell grid stays fixed, so the measured orders isolate the macroscopic
discretization. There is no exact solution; errors are differences between
solutions on consecutive grids at a fixed evaluation time, with the coarse
solution carried to the fine grid by bilinear embedding (exact on nested
uniform grids).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import SWEEP_PARAMETERS, RunConfig, validate_config
from .errors import ConfigError, MeshError, TwoScaleError
from .fem import element_tables
from .macro import run_simulation
from .mesh import StructuredGrid, Variant
from .problems import build_cell_setup, build_macro_setup

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvergenceRecord:
    """One refinement cycle of a convergence study.

    Errors compare this cycle's solution with the previous one, so cycle 0
    carries no errors; estimated orders need two consecutive errors and
    start at cycle 2. Missing entries are None and render as "-".
    """

    cycle: int
    cells: int
    h: float
    err_c_l2: float | None = None
    err_c_h1: float | None = None
    err_u_l2: float | None = None
    err_u_h1: float | None = None
    eoc_c_l2: float | None = None
    eoc_c_h1: float | None = None
    eoc_u_l2: float | None = None
    eoc_u_h1: float | None = None


CONVERGENCE_COLUMNS = tuple(f.name for f in dataclasses.fields(ConvergenceRecord))


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter sweep: which knob to vary and the values to try."""

    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"sweep.parameter: {self.parameter!r} is not one of "
                f"{', '.join(SWEEP_PARAMETERS)}")
        if not self.values:
            raise ConfigError("sweep.values: needs at least one value")


@dataclass
class SweepRecord:
    """Mass history of one run in a sweep, or the error that ended it."""

    parameter: str
    value: float
    times: np.ndarray
    mass: np.ndarray
    config: RunConfig
    error: TwoScaleError | None = None


def prolong_nodal(coarse: StructuredGrid, fine: StructuredGrid,
                  values: np.ndarray) -> np.ndarray:
    """Bilinear embedding of a nodal field into a nested refinement.

    Exact for bilinear-per-cell fields because every fine node lies inside
    (or on the boundary of) exactly one coarse cell of the same square
    lattice.
    """
    if coarse.lower != fine.lower or coarse.upper != fine.upper:
        raise MeshError("grids cover different rectangles")
    if fine.divisions % coarse.divisions != 0:
        raise MeshError(
            f"fine divisions {fine.divisions} are not a multiple of "
            f"coarse divisions {coarse.divisions}")
    ratio = fine.divisions // coarse.divisions
    values = np.asarray(values, dtype=float)
    flat = values.reshape(values.shape[0], -1)

    nf = fine.divisions
    jx, jy = np.meshgrid(np.arange(nf + 1), np.arange(nf + 1), indexing="ij")
    cx = np.minimum(jx // ratio, coarse.divisions - 1)
    cy = np.minimum(jy // ratio, coarse.divisions - 1)
    sx = ((jx - cx * ratio) / ratio)[..., None]
    sy = ((jy - cy * ratio) / ratio)[..., None]
    v00 = flat[coarse.node_index[cx, cy]]
    v10 = flat[coarse.node_index[cx + 1, cy]]
    v01 = flat[coarse.node_index[cx, cy + 1]]
    v11 = flat[coarse.node_index[cx + 1, cy + 1]]
    blended = ((1.0 - sx) * (1.0 - sy) * v00 + sx * (1.0 - sy) * v10
               + (1.0 - sx) * sy * v01 + sx * sy * v11)

    out = np.empty((fine.num_nodes,) + values.shape[1:])
    out.reshape(fine.num_nodes, -1)[fine.node_index[jx, jy]] = blended
    return out


def quadrature_norms(grid: StructuredGrid, values: np.ndarray):
    """(L2, H1) norms of a nodal field by the assembly quadrature.

    Vector fields sum over components; the H1 norm includes the L2 part.
    """
    tab = element_tables(grid)
    values = np.asarray(values, dtype=float)
    flat = values.reshape(values.shape[0], -1)
    elem = flat[grid.cells]
    at_q = np.einsum("qp,cpk->cqk", tab.N, elem)
    grads = np.einsum("qpb,cpk->cqkb", tab.G, elem)
    l2_sq = float(np.einsum("q,cqk->", tab.wdet, at_q ** 2))
    grad_sq = float(np.einsum("q,cqkb->", tab.wdet, grads ** 2))
    return math.sqrt(l2_sq), math.sqrt(l2_sq + grad_sq)


def estimated_orders(errors) -> list:
    """log2 of successive error ratios; exact p for errors C * 2**(-p*i).

    The first slot is None (an order needs two errors); nonpositive errors
    yield None as well.
    """
    out = []
    prev = None
    for i, cur in enumerate(errors):
        if i == 0 or prev is None or cur is None or prev <= 0.0 or cur <= 0.0:
            out.append(None)
        else:
            out.append(float(np.log2(prev / cur)))
        prev = cur
    return out


def _with_context(exc: TwoScaleError, label: str) -> TwoScaleError:
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"{label}: {exc.args[0]}",) + exc.args[1:]
    else:
        exc.args = (label,) + tuple(exc.args)
    return exc


def run_convergence(variant, max_cycle: int | None = None,
                    t_eval: float | None = None,
                    base: RunConfig | None = None) -> list:
    """Solve the coupled problem on cycles 0..max_cycle and difference them.

    Every cycle uses macro refinement equal to its index (cycle 0 is a
    single element) and a fresh coefficient cache, while the elastic cell
    correctors are computed once. Returns one ConvergenceRecord per cycle.
    """
    base = validate_config(base if base is not None else RunConfig())
    variant = Variant(variant) if not isinstance(variant, Variant) else variant
    max_cycle = base.max_cycle if max_cycle is None else int(max_cycle)
    t_eval = base.t_eval if t_eval is None else float(t_eval)
    if max_cycle < 2:
        raise ConfigError(f"convergence.max_cycle: must be >= 2, got {max_cycle}")
    if t_eval <= 0.0:
        raise ConfigError(f"convergence.t_eval: must be positive, got {t_eval}")

    cell = build_cell_setup(base)
    errs = {"c_l2": [None], "c_h1": [None], "u_l2": [None], "u_h1": [None]}
    grids, states = [], []
    for cycle in range(max_cycle + 1):
        cfg = dataclasses.replace(base, variant=variant.value,
                                  macro_refinement=cycle, t_end=t_eval)
        setup = build_macro_setup(cfg, cell)
        log.info("convergence cycle %d: %d cells, %d cell solves cached",
                 cycle, setup.macro_grid.num_cells, len(setup.infra.cache))
        try:
            result = run_simulation(setup.macro_grid, setup.infra,
                                    setup.data, t_eval)
        except TwoScaleError as exc:
            raise _with_context(exc, f"convergence cycle {cycle}")
        finally:
            setup.infra.close()
        grids.append(setup.macro_grid)
        states.append(result.final_state)
        if cycle > 0:
            coarse, fine = grids[cycle - 1], grids[cycle]
            prev, cur = states[cycle - 1], states[cycle]
            du = prolong_nodal(coarse, fine, prev.u) - cur.u
            dc = prolong_nodal(coarse, fine, prev.c) - cur.c
            u_l2, u_h1 = quadrature_norms(fine, du)
            c_l2, c_h1 = quadrature_norms(fine, dc)
            errs["u_l2"].append(u_l2)
            errs["u_h1"].append(u_h1)
            errs["c_l2"].append(c_l2)
            errs["c_h1"].append(c_h1)

    eocs = {k: estimated_orders(v) for k, v in errs.items()}
    records = []
    for cycle, grid in enumerate(grids):
        records.append(ConvergenceRecord(
            cycle=cycle, cells=grid.num_cells, h=grid.h,
            err_c_l2=errs["c_l2"][cycle], err_c_h1=errs["c_h1"][cycle],
            err_u_l2=errs["u_l2"][cycle], err_u_h1=errs["u_h1"][cycle],
            eoc_c_l2=eocs["c_l2"][cycle], eoc_c_h1=eocs["c_h1"][cycle],
            eoc_u_l2=eocs["u_l2"][cycle], eoc_u_h1=eocs["u_h1"][cycle]))
    return records


def run_sensitivity(sweep: SweepSpec, t_end: float | None = None,
                    base: RunConfig | None = None) -> list:
    """One full run per swept value; records come back sorted by value.

    A failing run is recorded with its error and the remaining runs
    continue. All run configs share every field except the swept one.
    """
    base = validate_config(base if base is not None else RunConfig())
    t_end = base.sweep_t_end if t_end is None else float(t_end)
    base = dataclasses.replace(base, t_end=t_end)
    cell = build_cell_setup(base)

    records = []
    for value in sorted(float(v) for v in sweep.values):
        cfg = dataclasses.replace(base, **{sweep.parameter: value})
        record = SweepRecord(parameter=sweep.parameter, value=value,
                             times=np.zeros(0), mass=np.zeros(0), config=cfg)
        try:
            cfg = validate_config(cfg)
            setup = build_macro_setup(cfg, cell)
            try:
                result = run_simulation(setup.macro_grid, setup.infra,
                                        setup.data, t_end)
            finally:
                setup.infra.close()
            record.times = result.observables[:, 0]
            record.mass = result.observables[:, 1]
        except TwoScaleError as exc:
            record.error = _with_context(
                exc, f"sweep {sweep.parameter}={value:g}")
            log.warning("sweep run failed: %s", record.error)
        records.append(record)
    return records
