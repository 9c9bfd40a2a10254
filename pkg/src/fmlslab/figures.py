"""Figure rendering for the command-line verbs.

Every function takes plain arrays/rows, draws one figure, and writes a
PNG next to the delimited data it illustrates.  Rendering goes through
an explicit Agg canvas (no pyplot, no global backend state) and strips
the writer's software tag, so a re-run reproduces the file bit for bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = [
    "alpha_scan_figure",
    "boundary_figure",
    "convergence_figure",
    "convexity_figure",
    "mc_histogram_figure",
    "price_curve_figure",
    "residual_figure",
]

_DPI = 120


def _new_figure(width: float = 7.0, height: float = 4.5) -> Figure:
    fig = Figure(figsize=(width, height), dpi=_DPI)
    FigureCanvasAgg(fig)
    return fig


def _finish(fig: Figure, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    return path


def price_curve_figure(s_grid, curves: dict, strike: float, path,
                       title: str = "put value") -> Path:
    """Value curves over the spot axis with the payoff for reference."""
    s_grid = np.asarray(s_grid, dtype=float)
    fig = _new_figure()
    ax = fig.add_subplot()
    ax.plot(s_grid, np.maximum(strike - s_grid, 0.0), color="0.6",
            linestyle="--", label="payoff")
    for label, values in curves.items():
        ax.plot(s_grid, np.asarray(values, dtype=float), label=label)
    ax.axvline(strike, color="0.85", linewidth=0.8)
    ax.set_xlabel("spot")
    ax.set_ylabel("value")
    ax.set_title(title)
    ax.legend(frameon=False)
    return _finish(fig, path)


def boundary_figure(rows, strike: float, path) -> Path:
    """Critical spot against time; ``rows`` holds (t, s_star) pairs."""
    rows = [(float(t), float(s)) for t, s in rows]
    fig = _new_figure()
    ax = fig.add_subplot()
    if rows:
        t, s_star = zip(*rows)
        ax.plot(t, s_star, marker=".", label="exercise boundary")
    ax.axhline(strike, color="0.6", linestyle="--", label="strike")
    ax.set_xlabel("time")
    ax.set_ylabel("critical spot")
    ax.set_title("early exercise boundary")
    ax.legend(frameon=False)
    return _finish(fig, path)


def convergence_figure(rows, path) -> Path:
    """Two panels: value ladder and its increments on a log scale."""
    rows = [r for r in rows if r["N"] >= 0]
    levels = [r["N"] for r in rows]
    values = [r["value"] for r in rows]
    increments = [(r["N"], r["increment"]) for r in rows
                  if np.isfinite(r["increment"]) and r["increment"] > 0.0]
    fig = _new_figure(width=9.0)
    left = fig.add_subplot(1, 2, 1)
    left.plot(levels, values, marker="o")
    left.set_xlabel("exercise-date doublings N")
    left.set_ylabel("value")
    left.set_title("value ladder")
    right = fig.add_subplot(1, 2, 2)
    if increments:
        n, inc = zip(*increments)
        right.semilogy(n, inc, marker="o")
    right.set_xlabel("exercise-date doublings N")
    right.set_ylabel("increment")
    right.set_title("increment decay")
    return _finish(fig, path)


def alpha_scan_figure(rows, path) -> Path:
    """Price against the tail index, one line per (pricer, spot)."""
    styles = {"european": "-", "american": "--"}
    series: dict[tuple, list] = {}
    for row in rows:
        if "reference" in row:
            continue
        series.setdefault((row["kind"], row["S"]), []).append(
            (row["alpha"], row["price"]))
    fig = _new_figure()
    ax = fig.add_subplot()
    for (kind, spot), points in sorted(series.items()):
        points.sort()
        alphas, prices = zip(*points)
        ax.plot(alphas, prices, marker="o", linestyle=styles.get(kind, "-"),
                label=f"{kind} S={spot:g}")
    ax.set_xlabel("tail index")
    ax.set_ylabel("price")
    ax.set_title("price against tail index (fixed volatility)")
    ax.legend(frameon=False, fontsize="small")
    return _finish(fig, path)


def convexity_figure(rows, path) -> Path:
    """Minimum second difference per time slice, one line per pricer."""
    series: dict[str, list] = {}
    for row in rows:
        series.setdefault(row["kind"], []).append(
            (row["t"], row["min_second_difference"]))
    fig = _new_figure()
    ax = fig.add_subplot()
    for kind, points in sorted(series.items()):
        points.sort()
        t, minima = zip(*points)
        ax.plot(t, minima, marker=".", label=kind)
    ax.axhline(0.0, color="0.6", linestyle="--", linewidth=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("min second difference in spot")
    ax.set_title("convexity margin by time slice")
    ax.legend(frameon=False)
    return _finish(fig, path)


def residual_figure(x, residual, path) -> Path:
    """|equation residual| against log-price on a log scale."""
    x = np.asarray(x, dtype=float)
    residual = np.asarray(residual, dtype=float)
    keep = np.isfinite(residual)
    fig = _new_figure()
    ax = fig.add_subplot()
    magnitude = np.abs(residual[keep])
    floor = np.finfo(float).tiny
    ax.semilogy(x[keep], np.maximum(magnitude, floor))
    ax.set_xlabel("log-price")
    ax.set_ylabel("|residual|")
    ax.set_title("equation residual")
    return _finish(fig, path)


def mc_histogram_figure(draws, table, path, bins: int = 80) -> Path:
    """Normalized histogram of simulated draws with the density overlaid."""
    draws = np.asarray(draws, dtype=float)
    lo, hi = -5.0, 10.0
    kept = draws[(draws >= lo) & (draws <= hi)]
    # normalize by the full draw count so mass in the clipped tails is
    # not silently redistributed into the window
    weights = np.full(kept.size, bins / ((hi - lo) * draws.size))
    fig = _new_figure()
    ax = fig.add_subplot()
    ax.hist(kept, bins=bins, range=(lo, hi), weights=weights, alpha=0.45,
            label=f"{draws.size} draws")
    xs = np.linspace(lo, hi, 601)
    ax.plot(xs, np.interp(xs, table.abscissae, table.values),
            label="tabulated density")
    ax.set_xlabel("draw")
    ax.set_ylabel("density")
    ax.set_title(f"sampler against density (tail index {table.alpha:g})")
    ax.legend(frameon=False)
    return _finish(fig, path)
