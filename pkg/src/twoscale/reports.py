"""Delimited outputs, the effective-tensor table, and report figures.

All files are deterministic for fixed inputs: floats are written with 9
significant digits, row order follows the input order, and figures use a
fixed style with no timestamps.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .elastic_cell import Tensor4Sym
from .macro import OBSERVABLE_COLUMNS
from .studies import CONVERGENCE_COLUMNS

SWEEP_COLUMNS = ("param_value", "t", "M")
MISSING = "-"

# canonical tensor slots up to minor and major symmetry, 1-based in reports
TENSOR_SLOTS = ((0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 1),
                (0, 1, 0, 1), (0, 1, 1, 1), (1, 1, 1, 1))
MATRIX_SLOTS = ((0, 0), (0, 1), (1, 1))


def fmt_float(value: float, sig: int = 9) -> str:
    return f"{value:.{sig}g}"


def _cell_text(value) -> str:
    if value is None:
        return MISSING
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return MISSING
    return fmt_float(float(value))


def write_csv(path, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell_text(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_observables_csv(path, observables: np.ndarray) -> None:
    write_csv(path, OBSERVABLE_COLUMNS, np.asarray(observables))


def write_convergence_csv(path, records) -> None:
    rows = [[getattr(r, name) for name in CONVERGENCE_COLUMNS]
            for r in records]
    write_csv(path, CONVERGENCE_COLUMNS, rows)


def write_sweep_csv(path, records) -> None:
    """Long-format sweep series; failed runs contribute no rows."""
    rows = []
    for rec in records:
        for t, m in zip(rec.times, rec.mass):
            rows.append((rec.value, t, m))
    write_csv(path, SWEEP_COLUMNS, rows)


def emit_tensor_table(a_ref: Tensor4Sym, a_star: Tensor4Sym,
                      d_hat: np.ndarray, d_star: np.ndarray, path) -> None:
    """Nonzero effective-tensor entries next to their reference values.

    Fourth-order entries are tabulated against the basis of unit symmetric
    dyads (both columns alike, so an unperforated cell shows two identical
    columns); six significant digits throughout.
    """
    def sig6(v: float) -> str:
        return f"{v:.6g}"

    lines = ["# elasticity: i j k l  A_ijkl  A*_ijkl"]
    ref_vals = {s: a_ref.dyad_response(*s) for s in TENSOR_SLOTS}
    star_vals = {s: a_star.dyad_response(*s) for s in TENSOR_SLOTS}
    scale = max(abs(v) for v in (*ref_vals.values(), *star_vals.values()))
    tol = 1e-9 * max(scale, 1.0)
    for s in TENSOR_SLOTS:
        if abs(ref_vals[s]) > tol or abs(star_vals[s]) > tol:
            i, j, k, l = (idx + 1 for idx in s)
            lines.append(f"{i} {j} {k} {l}  {sig6(ref_vals[s])}  "
                         f"{sig6(star_vals[s])}")
    lines.append("# diffusion: i j  D_ij  D*_ij")
    d_hat = np.asarray(d_hat, dtype=float)
    d_star = np.asarray(d_star, dtype=float)
    dtol = 1e-9 * max(np.abs(d_hat).max(), np.abs(d_star).max(), 1.0)
    for (i, j) in MATRIX_SLOTS:
        if abs(d_hat[i, j]) > dtol or abs(d_star[i, j]) > dtol:
            lines.append(f"{i + 1} {j + 1}  {sig6(d_hat[i, j])}  "
                         f"{sig6(d_star[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_schema(path) -> None:
    """Column contract for every delimited file this package emits."""
    lines = [
        "# columns of the delimited outputs; floats use 9 significant digits",
        f"# missing values are written as {MISSING}",
        "observables.csv: " + ", ".join(OBSERVABLE_COLUMNS),
        "convergence.csv: " + ", ".join(CONVERGENCE_COLUMNS),
        "sweep_<parameter>.csv: " + ", ".join(SWEEP_COLUMNS),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _agg_axes(nrows: int = 1, ncols: int = 1, height: float = 3.2):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(4.8 * ncols, height * nrows),
                             squeeze=False, constrained_layout=True)
    return fig, axes


def render_observables_figure(path, observables: np.ndarray) -> None:
    """Mass history and concentration bounds of one run."""
    obs = np.asarray(observables)
    fig, axes = _agg_axes(2, 1)
    axes[0, 0].plot(obs[:, 0], obs[:, 1], color="tab:blue")
    axes[0, 0].set_ylabel("mass M(t)")
    axes[1, 0].plot(obs[:, 0], obs[:, 2], color="tab:green", label="min c")
    axes[1, 0].plot(obs[:, 0], obs[:, 3], color="tab:red", label="max c")
    axes[1, 0].axhline(1.0, color="gray", lw=0.8, ls=":")
    axes[1, 0].set_xlabel("t")
    axes[1, 0].set_ylabel("concentration bounds")
    axes[1, 0].legend(loc="best")
    fig.savefig(path, dpi=130)
    _close(fig)


def render_convergence_figure(path, records) -> None:
    """Log-log errors against h with first- and second-order guides."""
    recs = [r for r in records if r.err_c_l2 is not None]
    fig, axes = _agg_axes(1, 2)
    series = (("err_u_l2", "err_u_h1", "displacement"),
              ("err_c_l2", "err_c_h1", "concentration"))
    hs = np.array([r.h for r in recs])
    for ax, (l2key, h1key, label) in zip(axes[0], series):
        e2 = np.array([getattr(r, l2key) for r in recs])
        e1 = np.array([getattr(r, h1key) for r in recs])
        ax.loglog(hs, e2, "o-", label="L2")
        ax.loglog(hs, e1, "s-", label="H1")
        if len(hs) >= 2 and e2[-1] > 0 and e1[-1] > 0:
            ax.loglog(hs, e1[-1] * (hs / hs[-1]), "--", color="gray",
                      lw=0.8, label="slope 1")
            ax.loglog(hs, e2[-1] * (hs / hs[-1]) ** 2, ":", color="gray",
                      lw=0.8, label="slope 2")
        ax.set_xlabel("h")
        ax.set_ylabel(f"{label} error")
        ax.legend(loc="best", fontsize=8)
    fig.savefig(path, dpi=130)
    _close(fig)


def render_sweep_figure(path, records) -> None:
    """One mass curve per swept value; failed runs are skipped."""
    fig, axes = _agg_axes()
    ax = axes[0, 0]
    for rec in records:
        if rec.error is not None or not len(rec.times):
            continue
        ax.plot(rec.times, rec.mass,
                label=f"{rec.parameter} = {rec.value:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("mass M(t)")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best", fontsize=8)
    fig.savefig(path, dpi=130)
    _close(fig)


def _close(fig) -> None:
    import matplotlib.pyplot as plt
    plt.close(fig)
