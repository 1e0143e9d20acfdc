"""Publication-style figures built from parsed CSV tables.

Each renderer returns the numeric annotations it drew (slopes, legend
labels) so self-tests can assert on them without parsing pixels.  Output is
deterministic: the Agg backend, fixed figure geometry, and no timestamps,
so rendering the same table twice gives identical bytes.
"""

from __future__ import annotations

import math

import numpy as np

from .tables import PlotDataError, Table, numeric_pairs, require_columns

ERROR_KEYS = ("err_u_l2", "err_u_h1", "err_c_l2", "err_c_h1")


def _agg_axes(nrows: int = 1, ncols: int = 1, height: float = 3.4):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(4.8 * ncols, height * nrows),
                             squeeze=False, constrained_layout=True)
    return fig, axes


def _save(fig, path) -> None:
    import matplotlib.pyplot as plt
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _final_slope(pairs) -> float:
    """Order estimate from the last two refinement levels."""
    (h0, e0), (h1, e1) = pairs[-2], pairs[-1]
    return math.log(e0 / e1) / math.log(h0 / h1)


def plot_convergence(table: Table, out_path) -> dict[str, float]:
    """Log-log error-vs-h panels for displacement and concentration.

    Reference guides of slope 1 and 2 pass through the finest-level points;
    each curve is annotated with the slope measured between the last two
    levels.  Returns those slopes keyed by error column.
    """
    require_columns(table, ("h",) + ERROR_KEYS)
    hs = table.column("h")
    series = {}
    for key in ERROR_KEYS:
        pairs = numeric_pairs(hs, table.column(key))
        if len(pairs) < 2:
            raise PlotDataError(
                f"{table.path}: column '{key}' has {len(pairs)} usable "
                "cycle(s); a convergence plot needs at least two")
        series[key] = pairs

    fig, axes = _agg_axes(1, 2)
    slopes: dict[str, float] = {}
    panels = (("displacement", "err_u_l2", "err_u_h1"),
              ("concentration", "err_c_l2", "err_c_h1"))
    for ax, (label, l2key, h1key) in zip(axes[0], panels):
        notes = []
        for key, marker in ((l2key, "o"), (h1key, "s")):
            pairs = series[key]
            x = np.array([h for h, _ in pairs])
            y = np.array([e for _, e in pairs])
            slope = _final_slope(pairs)
            slopes[key] = slope
            norm = "L2" if key.endswith("l2") else "H1"
            ax.loglog(x, y, marker + "-", label=norm)
            notes.append(f"{norm} slope {slope:.2f}")
        # guides anchored at the finest H1/L2 points
        xg = np.array([h for h, _ in series[l2key]])
        ax.loglog(xg, series[h1key][-1][1] * (xg / xg[-1]),
                  "--", color="gray", lw=0.8, label="slope 1")
        ax.loglog(xg, series[l2key][-1][1] * (xg / xg[-1]) ** 2,
                  ":", color="gray", lw=0.8, label="slope 2")
        ax.text(0.04, 0.96, "\n".join(notes), transform=ax.transAxes,
                va="top", fontsize=8,
                bbox={"boxstyle": "round", "fc": "white", "ec": "gray"})
        ax.set_xlabel("h")
        ax.set_ylabel(f"{label} error")
        ax.legend(loc="lower right", fontsize=8)
    _save(fig, out_path)
    return slopes


def extension_label(amplitude: float) -> str:
    """Amplitude as the maximal lateral extension percentage, 2a*100%."""
    return f"{200.0 * amplitude:g}%"


def plot_mass(tables, out_path) -> list[str]:
    """Mass-vs-time curves, one per swept parameter value.

    Accepts any number of long-format sweep tables; series are merged by
    parameter value and drawn in ascending order.  Returns the legend
    labels in drawing order.
    """
    series: dict[float, list[tuple[float, float]]] = {}
    for table in tables:
        require_columns(table, ("param_value", "t", "M"))
        if len(table) == 0:
            raise PlotDataError(f"{table.path}: no data rows, nothing to plot")
        values = table.column("param_value")
        usable = 0
        for value, t, m in zip(values, table.column("t"), table.column("M")):
            if None in (value, t, m):
                continue
            series.setdefault(value, []).append((t, m))
            usable += 1
        if usable == 0:
            raise PlotDataError(
                f"{table.path}: all rows have missing values, empty series")

    fig, axes = _agg_axes()
    ax = axes[0, 0]
    labels = []
    for value in sorted(series):
        pts = series[value]
        label = extension_label(value)
        labels.append(label)
        ax.plot([t for t, _ in pts], [m for _, m in pts], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("mass M(t)")
    ax.legend(loc="best", fontsize=8, title="max extension")
    _save(fig, out_path)
    return labels


def plot_eoc_table(table: Table, out_path) -> list[list[str]]:
    """The convergence record as a rendered table image.

    Returns the formatted cell texts (header excluded) for self-tests.
    """
    require_columns(table, ("cycle", "cells", "h"))
    if len(table) == 0:
        raise PlotDataError(f"{table.path}: no data rows, nothing to plot")

    def fmt(name, value):
        if value is None:
            return "-"
        if name in ("cycle", "cells"):
            return str(int(value))
        if isinstance(value, float):
            return f"{value:.3g}"
        return str(value)

    cells = [[fmt(name, table.data[name][i]) for name in table.columns]
             for i in range(len(table))]
    fig, axes = _agg_axes(height=0.5 + 0.3 * len(cells))
    ax = axes[0, 0]
    ax.axis("off")
    drawn = ax.table(cellText=cells, colLabels=list(table.columns),
                     loc="center")
    drawn.auto_set_font_size(False)
    drawn.set_fontsize(8)
    _save(fig, out_path)
    return cells
