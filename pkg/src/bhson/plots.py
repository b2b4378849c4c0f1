"""Optional chart rendering from a finished run (CSV stays canonical)."""

from __future__ import annotations

import os
from collections import defaultdict


def render_run(out, out_dir: str) -> list[str]:
    """Render per-window load, CIO and KPI time series to ``out_dir``/plots."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = os.path.join(out_dir, "plots")
    os.makedirs(plot_dir, exist_ok=True)
    by_cell = defaultdict(list)
    for row in out.window_rows:
        by_cell[row.cell_id].append(row)
    written = []

    def series(rows, attr):
        t = [r.time_s / 60.0 for r in rows]
        v = [getattr(r, attr) for r in rows]
        return t, v

    panels = [
        ("cio_db", "CIO [dB]", "cio.png"),
        ("scheduler_load", "scheduler load", "scheduler_load.png"),
        ("global_load", "global load", "global_load.png"),
        ("mean_ftt_s", "mean FTT [s]", "ftt.png"),
    ]
    for attr, ylabel, fname in panels:
        fig, ax = plt.subplots(figsize=(7, 4))
        for cid, rows in sorted(by_cell.items()):
            t, v = series(rows, attr)
            ax.plot(t, [float("nan") if x is None else x for x in v],
                    label=f"cell {cid}")
        ax.set_xlabel("time [min]")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        path = os.path.join(plot_dir, fname)
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    # Cluster KPIs are identical across cells; take them from any one series.
    rows = next(iter(by_cell.values()))
    fig, ax = plt.subplots(figsize=(7, 4))
    for attr, label in (("mut_mbps", "MUT"), ("cet_mbps", "CET")):
        t, v = series(rows, attr)
        ax.plot(t, [float("nan") if x is None else x for x in v], label=label)
    ax.set_xlabel("time [min]")
    ax.set_ylabel("throughput [Mbps]")
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = os.path.join(plot_dir, "kpis.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
