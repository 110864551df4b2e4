"""Figure rendering for run records (files only, non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.figsize": (5.5, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def render(plot, path):
    """Draw a :class:`~scnls.harness.record.PlotSpec` to ``path`` (PNG)."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, (x, y) in plot.series.items():
            ax.plot(x, y, marker="o", ms=3, lw=1.2, label=label)
        if plot.logx:
            ax.set_xscale("log")
        if plot.logy:
            ax.set_yscale("log")
        ax.set_xlabel(plot.xlabel)
        ax.set_ylabel(plot.ylabel)
        if plot.title:
            ax.set_title(plot.title)
        if plot.series:
            ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
