"""Synthetic CSV builders shaped like the producer's delimited outputs."""

import math

CONV_HEADER = ("cycle,cells,h,err_c_l2,err_c_h1,err_u_l2,err_u_h1,"
               "eoc_c_l2,eoc_c_h1,eoc_u_l2,eoc_u_h1")


def format_convergence(rows) -> str:
    """Rows of (cycle, cells, h, e_cl2, e_ch1, e_ul2, e_uh1) with EOC
    columns filled in by the two-level formula, '-' on the first row."""
    lines = [CONV_HEADER]
    prev = None
    for cycle, cells, h, *errs in rows:
        eocs = ["-"] * 4
        if prev is not None:
            ph, perrs = prev
            eocs = [f"{math.log(pe / e) / math.log(ph / h):.9g}"
                    for pe, e in zip(perrs, errs)]
        cols = [str(cycle), str(cells), f"{h:.9g}"]
        cols += [f"{e:.9g}" for e in errs] + eocs
        lines.append(",".join(cols))
        prev = (h, errs)
    return "\n".join(lines) + "\n"


def synthetic_convergence(cycles: int = 7, drift: float = 0.0):
    """Error sequences of order ~2 (L2) and ~1 (H1); ``drift`` perturbs the
    local order per cycle so EOC columns are not all identical."""
    rows = []
    for i in range(cycles):
        h = 0.5 ** i
        p2 = 2.0 + drift * math.sin(1.7 * i)
        p1 = 1.0 + 0.5 * drift * math.cos(2.3 * i)
        rows.append((i, 4 ** i, h,
                     0.31 * h ** p2, 0.92 * h ** p1,
                     0.12 * h ** p2, 0.55 * h ** p1))
    return rows


def format_sweep(series) -> str:
    """series: {param_value: [(t, M), ...]} in long format."""
    lines = ["param_value,t,M"]
    for value, pts in series.items():
        for t, m in pts:
            lines.append(f"{value:.9g},{t:.9g},{m:.9g}")
    return "\n".join(lines) + "\n"
