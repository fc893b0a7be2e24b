"""Figure emission for study reports, spectra and nodal fields.

All functions render straight to image files; none require a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np

_METHOD_COLORS = {"podg": "tab:red", "podi": "tab:blue"}


def _band_plot(ax, report, metric, label_fmt="{method}"):
    for method in sorted({r["method"] for r in report.rows}):
        rows = sorted(report.select(method=method), key=lambda r: r["n_rb"])
        n = [r["n_rb"] for r in rows]
        mean = [r[f"{metric}_mean"] for r in rows]
        lo = [r[f"{metric}_min"] for r in rows]
        hi = [r[f"{metric}_max"] for r in rows]
        color = _METHOD_COLORS.get(method)
        ax.plot(n, mean, lw=2, color=color, label=label_fmt.format(method=method.upper()))
        ax.fill_between(n, lo, hi, alpha=0.25, color=color)
    ax.set_xlabel("reduced basis size")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)


def plot_error_curves(report, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    _band_plot(ax, report, "err")
    ax.set_ylabel("relative L2 error")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_speedup_curves(report, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    _band_plot(ax, report, "speedup")
    ax.set_ylabel("speed-up over the full-order solve")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_data_study(report, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for method in sorted({r["method"] for r in report.rows}):
        rows = sorted(report.select(method=method), key=lambda r: r["n_s"])
        n = [r["n_s"] for r in rows]
        color = _METHOD_COLORS.get(method)
        ax.plot(n, [r["err_mean"] for r in rows], lw=2, color=color, label=method.upper())
        ax.fill_between(n, [r["err_min"] for r in rows], [r["err_max"] for r in rows],
                        alpha=0.25, color=color)
    ax.set_xlabel("number of snapshots")
    ax.set_ylabel("relative L2 error")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_extrapolation(report, path, n_rb=None):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    sizes = sorted({r["n_rb"] for r in report.rows})
    shown = [n_rb] if n_rb is not None else sizes[-2:]
    for method in sorted({r["method"] for r in report.rows}):
        for n, style in zip(shown, ("-", "--", ":")):
            rows = sorted(report.select(method=method, n_rb=n), key=lambda r: r["w_i"])
            w = [r["w_i"] for r in rows]
            e = [r["max_abs_err"] if r["max_abs_err"] is not None else np.nan for r in rows]
            ax.plot(w, e, style, color=_METHOD_COLORS.get(method),
                    label=f"{method.upper()} n={n}")
            fails = [r["w_i"] for r in rows if r["failed"]]
            if fails:
                ax.axvline(fails[0], color=_METHOD_COLORS.get(method), alpha=0.5, ls=":")
    lo, hi = report.metadata.get("train_range", (None, None))
    if hi is not None:
        ax.axvspan(lo, hi, color="0.9", zorder=0, label="training range")
    ax.set_xlabel("inflow speed [m/s]")
    ax.set_ylabel("max abs error over the domain")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_eigenvalue_decay(sigmas, labels, path):
    """Normalized correlation spectra on a log scale."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for sigma, label in zip(sigmas, labels):
        sigma = np.asarray(sigma)
        ax.semilogy(np.arange(1, len(sigma) + 1), sigma / sigma[0], "o-", ms=3, label=label)
    ax.set_xlabel("index")
    ax.set_ylabel("normalized eigenvalue")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_field(mesh, values, path, title=None, vmin=None, vmax=None, cmap="viridis"):
    """Nodal P1 field as a triangle-interpolated map with hole outlines."""
    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    fig, ax = plt.subplots(figsize=(6, 6))
    im = ax.tripcolor(tri, np.asarray(values), shading="gouraud",
                      vmin=vmin, vmax=vmax, cmap=cmap)
    _, holes = mesh.boundary_loops()
    for loop in holes:
        pts = mesh.vertices[loop + [loop[0]]]
        ax.plot(pts[:, 0], pts[:, 1], "k-", lw=1.2)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_speed_field(mesh, space, u, path, title=None):
    """Velocity magnitude at the mesh vertices (P1 view of the P2 field)."""
    nodal = space.velocity_nodal(u)
    speed = np.hypot(nodal[:, 0], nodal[:, 1])[: mesh.n_vertices]
    plot_field(mesh, speed, path, title=title, cmap="magma")


def plot_histogram(values, path, title=None, bins=40):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(values), bins=bins, color="tab:blue", alpha=0.85)
    ax.set_xlabel("concentration")
    ax.set_ylabel("samples")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
