"""Matplotlib figures written next to the CSV outputs (PNG, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "legend.fontsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}


def _figure(width=5.0, height=None):
    height = width * 0.75 if height is None else height
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_cloud(path, points, title="", overlay=None):
    """Scatter of a 1D or 2D cloud; 1D clouds sit on a line. ``overlay`` is
    drawn on top in a second color."""
    fig, ax = _figure()
    pts = np.asarray(points, dtype=float)

    def draw(p, **kw):
        if p.shape[1] == 1:
            ax.scatter(p[:, 0], np.zeros(len(p)), marker="|", linewidths=0.5, **kw)
            ax.set_yticks([])
        else:
            ax.scatter(p[:, 0], p[:, 1], s=0.3, linewidths=0, **kw)
            ax.set_aspect("equal", adjustable="datalim")

    draw(pts, color="k", label="attractor" if overlay is not None else None)
    if overlay is not None:
        draw(np.asarray(overlay, dtype=float), color="tab:red", alpha=0.5, label="orbit tail")
        ax.legend(markerscale=10, loc="upper right")
    ax.set_xlabel("x0")
    if pts.shape[1] == 2:
        ax.set_ylabel("x1")
    ax.set_title(title)
    _save(fig, path)


def plot_trace(path, iterations, gaps, tol=None, ylabel="step gap", title=""):
    fig, ax = _figure()
    ax.semilogy(iterations, np.maximum(gaps, 1e-300), "o-", ms=3, color="k")
    if tol is not None:
        ax.axhline(tol, color="tab:red", ls="--", lw=1, label=f"tol = {tol:g}")
        ax.legend()
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)


def plot_profile(path, profile, probe=None, eps=None, title=""):
    """Sup image diameter per word length, with the pair-probe curve if given."""
    fig, ax = _figure()
    ax.semilogy(profile.n_values, np.maximum(profile.sup_diam, 1e-300), color="k", label="sup image diameter")
    if probe is not None:
        ax.semilogy(probe.n_values, np.maximum(probe.max_dist, 1e-300), color="tab:blue", ls=":",
                    label=f"max pair distance (eta = {probe.eta:g})")
    if eps is not None:
        ax.axhline(eps, color="tab:red", ls="--", lw=1, label=f"eps = {eps:g}")
    ax.set_xlabel("word length n")
    ax.set_ylabel("distance")
    ax.legend()
    ax.set_title(title)
    _save(fig, path)


def plot_measure(path, points, weights, title="", bins=128):
    """Weighted histogram (1D) or weight-coloured atoms (2D)."""
    fig, ax = _figure()
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 1:
        ax.hist(pts[:, 0], bins=bins, weights=weights, color="0.3")
        ax.set_xlabel("x0")
        ax.set_ylabel("mass per bin")
    else:
        sc = ax.scatter(pts[:, 0], pts[:, 1], c=weights, s=0.5, linewidths=0, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="atom weight")
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
    ax.set_title(title)
    _save(fig, path)


def plot_ergodic(path, report, title=""):
    """Absolute error of every trial, grouped by observable, against the tolerance."""
    fig, ax = _figure()
    names = list(dict.fromkeys(r.observable for r in report.rows))
    for i, name in enumerate(names):
        errs = [r.error for r in report.rows if r.observable == name]
        ax.scatter(np.full(len(errs), i) + np.linspace(-0.2, 0.2, len(errs)), errs, s=8, color="k")
    ax.axhline(report.tol, color="tab:red", ls="--", lw=1, label=f"tol = {report.tol:g}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names)
    ax.set_ylabel("|time average - space average|")
    ax.legend()
    ax.set_title(title)
    _save(fig, path)


def plot_chaos(path, report, eps, title=""):
    fig, ax = _figure()
    d = [t.distance for t in report.trials]
    ax.bar(range(len(d)), d, color=["0.3" if t.passed else "tab:red" for t in report.trials])
    ax.axhline(eps, color="tab:red", ls="--", lw=1, label=f"eps = {eps:g}")
    ax.set_xlabel("trial")
    ax.set_ylabel("Hausdorff distance of tail to attractor")
    ax.legend()
    ax.set_title(title)
    _save(fig, path)
