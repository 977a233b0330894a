"""Figure rendering for the CLI report path.

Every CSV-emitting subcommand can drop a PNG next to its delimited output;
all figures go through the non-interactive Agg backend so runs work
headless. Figures are a convenience view, not part of the byte-reproducible
output set (CSV/PGM/binary are).
"""

from __future__ import annotations

import numpy as np


def _get_axes():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=120)
    return plt, fig, ax


def _finish(plt, fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_profile(path, y, profile, histogram=None, minima=None,
                   ylabel="detection probability density"):
    plt, fig, ax = _get_axes()
    if histogram is not None:
        centers, counts, total = histogram
        widths = np.diff(centers).mean() if len(centers) > 1 else 1.0
        dens = counts / (total * widths) if total > 0 else counts
        ax.bar(centers, dens, width=widths, alpha=0.45, color="tab:orange",
               label="detections")
    ax.plot(y, profile, color="tab:blue", lw=1.2, label="flux profile")
    if minima is not None:
        for m in minima:
            ax.axvline(m, color="k", ls=":", lw=0.7)
    ax.set_xlabel("screen position y")
    ax.set_ylabel(ylabel)
    ax.legend(loc="upper right", fontsize=8)
    _finish(plt, fig, path)


def render_norm_history(path, steps, norms):
    plt, fig, ax = _get_axes()
    ax.plot(steps, np.asarray(norms) - norms[0], lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("norm - initial norm")
    _finish(plt, fig, path)


def render_density(path, grid, values, title=""):
    plt, fig, ax = _get_axes()
    if grid.dims == 1:
        ax.plot(grid.axis(), values, lw=1.0)
        ax.set_xlabel("x")
        ax.set_ylabel("|Psi|^2")
    else:
        extent = (grid.origin[0], grid.upper[0], grid.origin[1], grid.upper[1])
        ax.imshow(values.T[::-1, :], extent=extent, aspect="auto",
                  cmap="magma")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    if title:
        ax.set_title(title, fontsize=9)
    _finish(plt, fig, path)


def render_ray_paths(path, paths, index_field=None):
    plt, fig, ax = _get_axes()
    if index_field is not None:
        g = index_field.grid
        extent = (g.origin[0], g.upper[0], g.origin[1], g.upper[1])
        ax.imshow(index_field.field.values.T[::-1, :], extent=extent,
                  aspect="auto", cmap="Blues", alpha=0.6)
    for p in paths:
        arr = p.as_array()
        ax.plot(arr[:, 1], arr[:, 2], lw=1.0, color="tab:red")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _finish(plt, fig, path)


def render_trajectories(path, times, positions):
    plt, fig, ax = _get_axes()
    pos = np.asarray(positions)
    ys = pos if pos.ndim == 2 else pos[:, :, 0]
    ax.plot(times, ys, lw=0.6, alpha=0.7, color="tab:blue")
    ax.set_xlabel("t")
    ax.set_ylabel("position")
    _finish(plt, fig, path)


def render_surface(path, x, values, mask=None, ylabel="action"):
    plt, fig, ax = _get_axes()
    vals = np.where(mask, values, np.nan) if mask is not None else values
    ax.plot(x, vals, lw=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel(ylabel)
    _finish(plt, fig, path)


def render_equivariance(path, times, tv, baseline, factor=2.0):
    plt, fig, ax = _get_axes()
    ax.plot(times, tv, "o-", label="ensemble vs density", lw=1.0)
    ax.plot(times, baseline, "s--", label="fresh-sample baseline", lw=1.0)
    ax.plot(times, factor * np.asarray(baseline), ":", color="k",
            label=f"{factor:g} x baseline")
    ax.set_xlabel("t")
    ax.set_ylabel("total-variation distance")
    ax.legend(fontsize=8)
    _finish(plt, fig, path)
