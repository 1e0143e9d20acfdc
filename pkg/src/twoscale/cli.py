"""Command-line entry point.

Resolves the configuration (file, then named flags, then --set overrides),
echoes it to `resolved_config` in the output directory, and dispatches on
the run mode. Exit codes: 0 success, 2 configuration problems, 3 solver
failures, 4 degenerate deformation, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import (MODES, RunConfig, apply_overrides, config_from_mapping,
                     parse_config, serialize_config, validate_config)
from .errors import (AssemblyError, ConfigError, DegenerateDeformation,
                     MeshError, SolverBreakdownError, SolverConvergenceError,
                     TwoScaleError)
from .macro import push_forward, run_simulation
from .problems import build_cell_setup, build_macro_setup, variant_from
from .reports import (emit_tensor_table, render_convergence_figure,
                      render_observables_figure, render_sweep_figure,
                      write_convergence_csv, write_observables_csv,
                      write_schema, write_sweep_csv)
from .studies import SweepSpec, run_convergence, run_sensitivity
from .vtkio import write_vtk

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DEGENERATE = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, DegenerateDeformation):
        return EXIT_DEGENERATE
    if isinstance(exc, (SolverBreakdownError, SolverConvergenceError,
                        AssemblyError)):
        return EXIT_SOLVER
    if isinstance(exc, (ConfigError, MeshError)):
        return EXIT_CONFIG
    return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoscale",
        description="Homogenized mechanodiffusion on a perforated cell: "
                    "effective tensors, coupled runs, convergence studies "
                    "and parameter sweeps.")
    parser.add_argument("--config", help="configuration file (key = value lines)")
    parser.add_argument("--mode", choices=MODES, help="run mode override")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--workers", type=int,
                        help="worker process count override")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", dest="overrides",
                        help="single-key override, highest precedence; repeatable")
    parser.add_argument("--verbose", action="store_true",
                        help="debug-level logging")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        cfg = parse_config(args.config)
    else:
        cfg = validate_config(RunConfig())
    named = {}
    if args.mode is not None:
        named["mode"] = args.mode
    if args.out is not None:
        named["outputs.directory"] = args.out
    if args.workers is not None:
        named["parallel.workers"] = str(args.workers)
    if named:
        cfg = config_from_mapping(named, base=cfg)
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    return cfg


def run_cells_only(cfg: RunConfig, out: Path) -> None:
    """Solve the cell problems once and tabulate A*, D*, J*."""
    from .diffusion_cell import CellInfrastructure

    cell = build_cell_setup(cfg)
    infra = CellInfrastructure(cell.grid, cell.chi, cell.d_hat,
                               j_min=cfg.j_min)
    value = infra.point_value(np.zeros((2, 2)), t=0.0, x_q=(0.0, 0.0))
    emit_tensor_table(cell.material, cell.a_star, cell.d_hat, value.d_star,
                      out / "tensors.txt")
    log.info("cell volume fraction J* = %.9g", value.j_star)
    log.info("effective tensors written to %s", out / "tensors.txt")


def run_simulate(cfg: RunConfig, out: Path) -> None:
    setup = build_macro_setup(cfg)
    stride = cfg.vtk_stride
    written = []

    def write_state(k: int, state) -> None:
        points, c = push_forward(setup.macro_grid, state)
        write_vtk(out / f"state_{k:04d}.vtk", points, setup.macro_grid.cells,
                  point_data={"c": c, "u": state.u},
                  title=f"coupled state at t={state.t:.9g}")
        written.append(k)

    counter = [0]

    def callback(state, eff) -> None:
        k = counter[0]
        counter[0] += 1
        if stride > 0 and k % stride == 0:
            write_state(k, state)

    try:
        result = run_simulation(setup.macro_grid, setup.infra, setup.data,
                                cfg.t_end, callback=callback)
    finally:
        setup.infra.close()
    last = counter[0] - 1
    if stride > 0 and last not in written:
        write_state(last, result.final_state)
    write_observables_csv(out / "observables.csv", result.observables)
    render_observables_figure(out / "observables.png", result.observables)
    obs = result.observables
    log.info("t_end=%.9g: mass=%.9g, c range [%.9g, %.9g]",
             obs[-1, 0], obs[-1, 1], obs[-1, 2], obs[-1, 3])


def run_convergence_mode(cfg: RunConfig, out: Path) -> None:
    records = run_convergence(variant_from(cfg), cfg.max_cycle, cfg.t_eval,
                              base=cfg)
    write_convergence_csv(out / "convergence.csv", records)
    render_convergence_figure(out / "convergence.png", records)
    for r in records:
        log.info("cycle %d: cells=%d h=%.4g  u: L2=%s (EOC %s) H1=%s (EOC %s)"
                 "  c: L2=%s (EOC %s) H1=%s (EOC %s)",
                 r.cycle, r.cells, r.h,
                 *(("-" if v is None else f"{v:.4g}")
                   for v in (r.err_u_l2, r.eoc_u_l2, r.err_u_h1, r.eoc_u_h1,
                             r.err_c_l2, r.eoc_c_l2, r.err_c_h1, r.eoc_c_h1)))


def run_sweep_mode(cfg: RunConfig, out: Path) -> int:
    spec = SweepSpec(cfg.sweep_parameter, tuple(cfg.sweep_values))
    records = run_sensitivity(spec, cfg.sweep_t_end, base=cfg)
    write_sweep_csv(out / f"sweep_{spec.parameter}.csv", records)
    render_sweep_figure(out / f"sweep_{spec.parameter}.png", records)
    failures = 0
    for rec in records:
        if rec.error is not None:
            failures += 1
            log.warning("%s = %g failed: %s", spec.parameter, rec.value,
                        rec.error)
            continue
        if spec.parameter == "amplitude":
            log.info("a = %g (max lateral extension %g%%): M(%.9g) = %.9g",
                     rec.value, 200.0 * rec.value, rec.times[-1],
                     rec.mass[-1])
        else:
            log.info("%s = %g: M(%.9g) = %.9g", spec.parameter, rec.value,
                     rec.times[-1], rec.mass[-1])
    if failures == len(records):
        return exit_code_for(next(r.error for r in records
                                  if r.error is not None))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        cfg = resolve_config(args)
    except TwoScaleError as exc:
        log.error("%s", exc)
        return exit_code_for(exc)

    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config").write_text(serialize_config(cfg),
                                             encoding="utf-8")
        write_schema(out / "schema.txt")
    except OSError as exc:
        log.error("cannot prepare output directory %s: %s", out, exc)
        return EXIT_FAILURE

    try:
        if cfg.mode == "cells-only":
            run_cells_only(cfg, out)
        elif cfg.mode == "simulate":
            run_simulate(cfg, out)
        elif cfg.mode == "convergence":
            run_convergence_mode(cfg, out)
        else:
            return run_sweep_mode(cfg, out)
    except TwoScaleError as exc:
        log.error("%s", exc)
        return exit_code_for(exc)
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
