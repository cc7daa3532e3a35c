"""Plots for sweep results: convergence and re-election vs. diameter.

Figures are rendered headless to image files next to the CSV so a sweep
leaves a self-contained directory. Rows come in as the dictionaries that
`harness.sweep` returns; mean rows drive the lines, per-seed rows the
scatter. Runs that never settled (empty cells) are simply left out.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _grouped(rows, field):
    """Split rows into per-configuration series keyed by (drop_rate, T).

    Returns {key: (scatter_x, scatter_y, line_x, line_y)} with the line
    built from mean rows in diameter order.
    """
    series = {}
    for r in rows:
        val = r.get(field)
        if val is None:
            continue
        key = (r["drop_rate"], r["T"])
        sx, sy, lx, ly = series.setdefault(key, ([], [], [], []))
        if r["seed"] == "mean":
            lx.append(r["diameter"])
            ly.append(val)
        else:
            sx.append(r["diameter"])
            sy.append(val)
    return series


def _plot_metric(rows, field, ylabel, path):
    series = _grouped(rows, field)
    if not series:
        return None
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (drop, period), (sx, sy, lx, ly) in sorted(series.items()):
        label = f"drop={drop:g}, T={period:g}"
        dots = ax.plot(sx, sy, ".", alpha=0.45)[0]
        order = sorted(range(len(lx)), key=lx.__getitem__)
        ax.plot([lx[i] for i in order], [ly[i] for i in order],
                "o-", color=dots.get_color(), label=label)
    ax.set_xlabel("graph diameter")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(rows, out_dir, stem="sweep"):
    """Render every figure the rows support; returns the written paths."""
    out = []
    p = _plot_metric(rows, "convergence_time", "ticks to converge",
                     f"{out_dir}/{stem}-convergence.png")
    if p:
        out.append(p)
    p = _plot_metric(rows, "reelection_time", "ticks to re-elect",
                     f"{out_dir}/{stem}-reelection.png")
    if p:
        out.append(p)
    return out
