"""Report figures rendered to PNG files next to the CSV exports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .flow import Snapshot  # noqa: E402
from .geometry import GraphFunction, geometry_field  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
    "xtick.direction": "in",
    "ytick.direction": "in",
}


def _pick(snaps: Sequence[Snapshot], count: int = 6) -> list[Snapshot]:
    idx = np.unique(np.linspace(0, len(snaps) - 1, min(count, len(snaps))).round().astype(int))
    return [snaps[i] for i in idx]


def _save(fig, path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_profiles(snaps: Sequence[Snapshot], mode: str, path) -> Path:
    """Graph function over the disk and the embedded meridian inside the unit half-disk."""
    with plt.rc_context(STYLE):
        fig, (ax_u, ax_x) = plt.subplots(1, 2, figsize=(10.0, 4.2))
        cmap = plt.get_cmap("viridis")
        chosen = _pick(snaps)
        for k, s in enumerate(chosen):
            u = GraphFunction(mode, s.values)
            color = cmap(k / max(len(chosen) - 1, 1))
            label = f"t = {s.t:.4f}"
            ax_u.plot(u.nodes, s.values, color=color, label=label)
            X = geometry_field(u).X
            ax_x.plot(X[:, 1], X[:, 0], color=color, label=label)
            if mode == "axisymmetric":
                ax_x.plot(-X[:, 1], X[:, 0], color=color)
        ax_u.axhline(1.0, color="k", lw=0.8, ls="--")
        ax_u.set_xlabel("x" if mode == "interval" else "r")
        ax_u.set_ylabel("u")
        ax_u.set_title("graph function")
        ax_u.legend()
        phi = np.linspace(0.0, np.pi, 200)
        ax_x.plot(np.cos(phi), np.sin(phi), color="0.5", lw=0.8)
        ax_x.set_aspect("equal")
        ax_x.set_xlabel("$x_1$")
        ax_x.set_ylabel("$x_0$")
        ax_x.set_title("hypersurface in the half-ball")
        return _save(fig, path)


def plot_timeseries(snaps: Sequence[Snapshot], path, t_star: float | None = None) -> Path:
    """Area law, curvature extrema, rim height and flattening metrics against time."""
    t = np.array([s.t for s in snaps])
    a = np.array([s.area for s in snaps])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(10.0, 6.5), sharex=True)
        ax = axes[0, 0]
        ax.plot(t, a, "o", ms=2.5, label="A(t)")
        ax.plot(t, a[0] * np.exp(t - t[0]), "k-", lw=0.8, label="A(0) exp(t)")
        ax.set_ylabel("area")
        ax.legend()
        ax = axes[0, 1]
        ax.plot(t, [s.max_H for s in snaps], label="max H")
        ax.plot(t, [s.min_H for s in snaps], label="min H")
        ax.plot(t, [s.min_kappa for s in snaps], ls=":", label="min kappa")
        ax.set_ylabel("curvature")
        ax.legend()
        ax = axes[1, 0]
        ax.plot(t, [s.rim_height for s in snaps])
        ax.set_ylabel("rim height")
        ax.set_xlabel("t")
        ax = axes[1, 1]
        ax.plot(t, [s.sup_u_minus_1 for s in snaps], label="sup(u - 1)")
        ax.plot(t, [s.sup_Du for s in snaps], label="sup |Du|")
        ax.set_xlabel("t")
        ax.legend()
        if t_star is not None:
            for ax in axes.flat:
                ax.axvline(t_star, color="r", lw=0.8, ls="--")
        return _save(fig, path)


def plot_residuals(t, series: dict[str, np.ndarray], path, t_warmup: float | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, values in series.items():
            ax.semilogy(t, np.maximum(values, 1e-17), label=name)
        if t_warmup is not None:
            ax.axvspan(0.0, t_warmup, color="0.85", label="warm-up")
        ax.set_xlabel("t")
        ax.set_ylabel("residual")
        ax.legend()
        return _save(fig, path)


def plot_convergence(rows: Sequence[dict], columns: Sequence[str], path) -> Path:
    """Residuals against grid spacing, one line per (lambda0, amplitude)."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(columns), figsize=(4.0 * len(columns), 3.8), squeeze=False)
        groups: dict[tuple, list[dict]] = {}
        for r in rows:
            groups.setdefault((r["lambda0"], r["amplitude"]), []).append(r)
        for ax, col in zip(axes[0], columns):
            for (lam, a), rs in sorted(groups.items()):
                rs = sorted(rs, key=lambda r: r["m"])
                h = [1.0 / (r["m"] - 1) for r in rs]
                y = [r[col] for r in rs]
                ax.loglog(h, y, "o-", label=f"lambda0={lam:g}, a={a:g}")
            ax.set_xlabel("h")
            ax.set_title(col)
        axes[0, 0].legend()
        return _save(fig, path)
