"""Static figures drawn from a report's plot data."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# plot data sets whose x axis spans orders of magnitude
_LOG_X = {"ratio_sweep", "atom_mass"}


def _series(rows):
    by_q = defaultdict(list)
    for x, q, v, lo, hi in rows:
        if v is not None:
            by_q[q].append((x, v, lo, hi))
    return by_q


def plot_one(name: str, rows, path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for q, pts in sorted(_series(rows).items()):
        pts.sort(key=lambda p: p[0])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        line, = ax.plot(xs, ys, marker="o", ms=3, label=q)
        band = [(x, lo, hi) for x, _, lo, hi in pts if lo is not None and hi is not None]
        if band:
            ax.fill_between([b[0] for b in band], [b[1] for b in band], [b[2] for b in band],
                            color=line.get_color(), alpha=0.2, lw=0)
    if name in _LOG_X:
        ax.set_xscale("symlog", linthresh=1)
    ax.set_xlabel("k" if name in _LOG_X else "x")
    ax.set_title(f"{title}: {name}" if title else name, fontsize=9)
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def render_figures(report: dict, out) -> list[Path]:
    fig_dir = Path(out) / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    return [plot_one(name, rows, fig_dir / f"{name}.png", report.get("experiment", ""))
            for name, rows in sorted(report.get("plotdata", {}).items()) if rows]
