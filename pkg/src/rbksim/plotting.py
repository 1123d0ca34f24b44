"""Optional PNG figures written next to the CSV output (``--figures``).

The CSV files remain the data contract; these are quick-look renderings.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _log_x(t):
    return t.size > 1 and t[t > 0].size > 1 and t[t > 0].max() / t[t > 0].min() > 100


def trajectory_figure(traj, path, max_sizes: int = 8) -> Path:
    """Concentrations of the first few sizes plus total number and mass."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        t = traj.times
        keep = t > 0 if _log_x(t) else np.ones_like(t, dtype=bool)
        for j in range(min(max_sizes, traj.n)):
            c = traj.values[:, j]
            if np.any(c[keep] > 0):
                ax1.plot(t[keep], c[keep], label=f"$c_{{{j + 1}}}$")
        ax1.set_xlabel("t")
        ax1.set_ylabel("concentration")
        mom = traj.moments()
        ax2.plot(t[keep], mom[keep, 0], label=r"$\nu$")
        ax2.plot(t[keep], mom[keep, 1], label="mass")
        ax2.plot(t[keep], mom[keep, 2], label=r"$\nu_{odd}$")
        ax2.set_xlabel("t")
        for ax in (ax1, ax2):
            if _log_x(t):
                ax.set_xscale("log")
                ax.set_yscale("log")
            ax.legend()
        return _save(fig, path)


def scaling_figure(table, path, limits: dict | None = None) -> Path:
    """``t * nu``, ``t * nu_odd`` and ``t * c_j`` against t, with limit lines."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        t = table.column("t")
        keep = t > 0
        for name in table.columns[1:]:
            ax.plot(t[keep], table.column(name)[keep], label=name.replace("_", " "))
        for label, value in (limits or {}).items():
            ax.axhline(value, ls="--", lw=0.8, color="0.4", label=f"{label} = {value:g}")
        ax.set_xscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("t x quantity")
        fig.set_size_inches(8.0, 4.0)
        ax.legend(loc="upper left", bbox_to_anchor=(1.01, 1.0))
        return _save(fig, path)


def convergence_figure(rows, path) -> Path:
    """``D(N)`` against N on log axes."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        n = np.array([r[0] for r in rows], dtype=float)
        d = np.array([r[1] for r in rows], dtype=float)
        if np.all(d > 0):
            ax.loglog(n, d, "o-")
        else:
            ax.semilogx(n, d, "o-")
        ax.set_xlabel("N")
        ax.set_ylabel("D(N)")
        return _save(fig, path)
