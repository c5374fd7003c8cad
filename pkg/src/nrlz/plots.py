"""SVG renderings of the CSV outputs (cosmetic only)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_csv  # noqa: E402


def _curve(rows, ax):
    series = defaultdict(list)
    for r in rows:
        series[(r["method"], float(r["delta"]))].append((float(r["alpha"]), float(r["P"]), float(r["stderr"])))
    for (method, delta), pts in sorted(series.items()):
        pts.sort()
        a, P, se = map(np.array, zip(*pts))
        label = f"{method}, delta={delta:g}"
        if np.any(se > 0):
            ax.errorbar(a, P, yerr=se, fmt="o", ms=3, label=label)
        else:
            ax.plot(a, P, "-", label=label)
    ax.set_xscale("symlog", linthresh=min(abs(float(r["alpha"])) for r in rows))
    ax.set_xlabel("alpha")
    ax.set_ylabel("P")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=7)


def _phase(rows, fig):
    method = rows[0]["method"]
    rows = [r for r in rows if r["method"] == method]
    alphas = sorted({float(r["alpha"]) for r in rows})
    deltas = sorted({float(r["delta"]) for r in rows})
    grid = np.full((len(deltas), len(alphas)), np.nan)
    for r in rows:
        grid[deltas.index(float(r["delta"])), alphas.index(float(r["alpha"]))] = float(r["P"])
    ax = fig.add_subplot(111)
    im = ax.imshow(grid, origin="lower", aspect="auto", vmin=0, vmax=1, cmap="viridis")
    ticks = np.linspace(0, len(alphas) - 1, min(len(alphas), 7)).astype(int)
    ax.set_xticks(ticks, [f"{alphas[i]:.2g}" for i in ticks])
    dticks = np.linspace(0, len(deltas) - 1, min(len(deltas), 6)).astype(int)
    ax.set_yticks(dticks, [f"{deltas[i]:.2g}" for i in dticks])
    ax.set_xlabel("alpha")
    ax.set_ylabel("delta")
    ax.set_title(method)
    fig.colorbar(im, ax=ax, label="P")


def _spectrum(rows, fig):
    t = np.array([float(r["t"]) for r in rows])
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    for key, ax in (("re", ax1), ("im", ax2)):
        ax.plot(t, [float(r[f"{key}_e_plus"]) for r in rows], label="E+")
        ax.plot(t, [float(r[f"{key}_e_minus"]) for r in rows], label="E-")
        ax.set_ylabel(f"{key.capitalize()} E")
    ax1.legend(fontsize=7)
    ax2.set_xlabel("t")


def render(csv_path, svg_path) -> str:
    """Render ``csv_path`` to ``svg_path``; returns the detected CSV kind."""
    kind, rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    fig = plt.figure(figsize=(6, 4.5))
    try:
        if kind in ("curve", "compare"):
            _curve(rows, fig.add_subplot(111))
        elif kind == "phase":
            _phase(rows, fig)
        elif kind == "spectrum":
            _spectrum(rows, fig)
        else:
            raise ValueError(f"no plot for {kind} files")
        fig.tight_layout()
        fig.savefig(svg_path, format="svg")
    finally:
        plt.close(fig)
    return kind
