"""Optional PNG figures next to the delimited outputs (``--plots``)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .detector import RegionAnalysis  # noqa: E402
from .profiler import SweepResult  # noqa: E402
from .report import HIST_EDGES, RegionReport  # noqa: E402


def plot_profiles(analysis: RegionAnalysis, path: str | Path) -> None:
    """Every site's profile in grey, flagged sites in colour, mean in black."""
    fig, ax = plt.subplots(figsize=(10, 4.5))
    flagged = set(analysis.anomalous)
    for site, p in analysis.profiles.items():
        if site not in flagged:
            ax.plot(p.window_starts, p.values, color="0.75", lw=0.7)
    for site in sorted(flagged):
        p = analysis.profiles[site]
        ax.plot(p.window_starts, p.values, lw=1.2, label=site)
    m = analysis.mean_profile
    ax.plot(m.window_starts, m.values, color="k", lw=2.0, label="mean")
    ax.set_xlabel("window start")
    ax.set_ylabel("normalised WPE")
    ax.set_title(f"region {analysis.region_id}")
    ax.legend(loc="best", fontsize="small")
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_histogram(report: RegionReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.stairs(report.hist_counts, HIST_EDGES, fill=True)
    ax.set_xlabel("correlation with mean profile")
    ax.set_ylabel("sites")
    ax.set_title(f"region {report.region_id}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(result: SweepResult, path: str | Path) -> None:
    keys: Sequence[tuple[int, int]] = sorted(result.cells)
    data = [[v for v in result.values[k].values()] for k in keys]
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(keys)), 4))
    ax.boxplot(data, whis=1.5)
    ax.set_xticks(range(1, len(keys) + 1), [f"d={d}\ntau={t}" for d, t in keys], fontsize="small")
    ax.set_ylabel("normalised WPE")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
