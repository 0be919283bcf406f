"""Per-region report objects, their JSON form, and the correlation histogram."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .detector import AnomalyLocalization, GenerationSummary, RegionAnalysis, Verdict
from .series import format_timestamps
from .wpe import ContractError

BIN_WIDTH = 0.05
N_BINS = 40
# exact decimal edges -1.0, -0.95, ..., 1.0
HIST_EDGES = tuple((k - N_BINS // 2) / (N_BINS // 2) for k in range(N_BINS + 1))
HIST_HEADER = ("region_id", "bin_low", "bin_high", "count")


def histogram(correlations: Iterable[float | None]) -> tuple[int, ...]:
    """Counts over 40 bins of width 0.05 on [-1, 1].

    Bins are closed on the right, ``(a, b]``; -1 itself goes to the first
    bin. Undefined correlations are skipped.
    """
    c = np.array([x for x in correlations if x is not None], dtype=float)
    idx = np.searchsorted(np.array(HIST_EDGES), c, side="left") - 1
    idx = np.clip(idx, 0, N_BINS - 1)
    return tuple(int(n) for n in np.bincount(idx, minlength=N_BINS))


@dataclass(frozen=True)
class LocalizationSummary:
    n_windows: int
    direction: str | None
    periods: tuple[tuple[str, str], ...]
    max_abs_deviation: float | None

    @classmethod
    def from_localization(cls, loc: AnomalyLocalization) -> "LocalizationSummary":
        if not loc.window_indices:
            return cls(0, None, (), None)
        starts = format_timestamps(np.array([t for t, _ in loc.divergent_windows]))
        idx = loc.window_indices
        periods, first = [], 0
        for k in range(1, len(idx) + 1):
            if k == len(idx) or idx[k] != idx[k - 1] + 1:
                periods.append((starts[first], starts[k - 1]))
                first = k
        dev = max(abs(d) for _, d in loc.divergent_windows)
        return cls(len(idx), loc.direction.value, tuple(periods), dev)


@dataclass(frozen=True)
class SiteRecord:
    site_id: str
    correlation: float | None
    verdict: str
    mean_generation: float
    localization: LocalizationSummary


@dataclass(frozen=True)
class RegionReport:
    region_id: str
    n_sites: int
    rule: str
    generation: tuple[tuple[str, float], ...]
    sites: tuple[SiteRecord, ...]
    hist_counts: tuple[int, ...]

    @property
    def anomalous(self) -> list[str]:
        return sorted(r.site_id for r in self.sites if r.verdict != Verdict.NORMAL.value)

    @property
    def hist_edges(self) -> tuple[float, ...]:
        return HIST_EDGES

    def to_json(self) -> str:
        doc = {
            "region_id": self.region_id,
            "n_sites": self.n_sites,
            "rule": self.rule,
            "anomalous": self.anomalous,
            "generation": dict(self.generation),
            "sites": [
                {
                    "site_id": r.site_id,
                    "correlation": r.correlation,
                    "verdict": r.verdict,
                    "mean_generation": r.mean_generation,
                    "localization": {
                        **asdict(r.localization),
                        "periods": [list(p) for p in r.localization.periods],
                    },
                }
                for r in self.sites
            ],
            "histogram": {"edges": list(HIST_EDGES), "counts": list(self.hist_counts)},
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RegionReport":
        doc = json.loads(text)
        if tuple(doc["histogram"]["edges"]) != HIST_EDGES:
            raise ContractError("report histogram edges do not match the fixed bins")
        sites = []
        for r in doc["sites"]:
            loc = r["localization"]
            sites.append(SiteRecord(
                r["site_id"], r["correlation"], r["verdict"], r["mean_generation"],
                LocalizationSummary(loc["n_windows"], loc["direction"],
                                    tuple(tuple(p) for p in loc["periods"]),
                                    loc["max_abs_deviation"]),
            ))
        return cls(doc["region_id"], doc["n_sites"], doc["rule"],
                   tuple(doc["generation"].items()), tuple(sites),
                   tuple(doc["histogram"]["counts"]))


def _sort_key(rec: SiteRecord):
    # Insufficient sites (no correlation) lead, as the least similar
    c = -math.inf if rec.correlation is None else rec.correlation
    return (c, rec.site_id)


def build_report(
    analysis: RegionAnalysis,
    localizations: Mapping[str, AnomalyLocalization],
    generation: GenerationSummary,
) -> RegionReport:
    sites = set(analysis.verdicts)
    for name, other in (("localizations", set(localizations)),
                        ("generation stats", set(generation.site_means))):
        if other != sites:
            diff = sorted(sites ^ other)
            raise ContractError(f"{name} do not cover the analysed sites: {', '.join(diff)}")
    records = [
        SiteRecord(
            s,
            analysis.correlations[s],
            analysis.verdicts[s].value,
            generation.site_means[s],
            LocalizationSummary.from_localization(localizations[s]),
        )
        for s in sites
    ]
    records.sort(key=_sort_key)
    gen = (("mean", generation.mean), ("q1", generation.q1),
           ("median", generation.median), ("q3", generation.q3))
    return RegionReport(
        analysis.region_id,
        len(records),
        analysis.rule.name,
        gen,
        tuple(records),
        histogram(analysis.correlations.values()),
    )


def write_histogram_csv(reports: Iterable[RegionReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HIST_HEADER)
        for rep in reports:
            for k, n in enumerate(rep.hist_counts):
                w.writerow((rep.region_id, repr(HIST_EDGES[k]), repr(HIST_EDGES[k + 1]), n))


def read_histogram_csv(path: str | Path) -> dict[str, tuple[int, ...]]:
    out: dict[str, list[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HIST_HEADER:
            raise ContractError(f"unexpected histogram header {header}")
        for region, lo, hi, n in reader:
            counts = out.setdefault(region, [])
            k = len(counts)
            if float(lo) != HIST_EDGES[k] or float(hi) != HIST_EDGES[k + 1]:
                raise ContractError(f"histogram row for {region} has unexpected edges {lo}, {hi}")
            counts.append(int(n))
    return {r: tuple(c) for r, c in out.items()}
