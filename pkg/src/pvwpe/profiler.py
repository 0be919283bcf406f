"""Rolling-window WPE profiles and the (d, tau) sensitivity sweep."""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .series import GenerationSeries, format_timestamps, parse_timestamp
from .wpe import (
    ContractError,
    EmbeddingConfig,
    ShortWindowWarning,
    embedding_codes,
    embedding_weights,
    entropy_from_histogram,
    wpe,
)

log = logging.getLogger(__name__)

SAMPLES_PER_DAY_5MIN = 288
DEFAULT_GRID = tuple(EmbeddingConfig(d, tau) for d in range(3, 8) for tau in (1, 2, 3))

PROFILE_HEADER = ("site_id", "window_start", "wpe")
SWEEP_HEADER = ("d", "tau", "median", "q1", "q3", "whisker_low", "whisker_high", "n_outliers")


@dataclass(frozen=True)
class WindowSpec:
    """Window width and stride, both in samples."""

    width: int
    stride: int = SAMPLES_PER_DAY_5MIN

    def __post_init__(self):
        if self.width < 1:
            raise ContractError(f"window width must be positive, got {self.width}")
        if self.stride < 1:
            raise ContractError(f"stride must be >= 1, got {self.stride}")

    def validate(self, cfg: EmbeddingConfig) -> None:
        if self.width < cfg.span:
            raise ContractError(
                f"window width {self.width} is shorter than one embedding vector ({cfg.span})"
            )
        if self.width <= 5 * cfg.n_patterns:
            warnings.warn(
                f"window width {self.width} does not satisfy N > 5*d! = {5 * cfg.n_patterns}",
                ShortWindowWarning,
                stacklevel=3,
            )

    def n_windows(self, n: int) -> int:
        if n < self.width:
            return 0
        return (n - self.width) // self.stride + 1


@dataclass(eq=False)
class WpeProfile:
    """Normalised WPE per window position for one site (NaN = Undefined).

    Window ``k`` starts ``k * stride`` samples after ``start``.
    """

    site_id: str
    start: np.datetime64
    interval: np.timedelta64
    stride: int
    width: int
    values: np.ndarray
    diagnostic: str | None = None

    def __len__(self):
        return int(self.values.size)

    @property
    def window_starts(self) -> np.ndarray:
        return self.start + np.arange(len(self)) * (self.stride * self.interval)

    @property
    def window_offsets(self) -> np.ndarray:
        """Sample index of each window's first sample."""
        return np.arange(len(self)) * self.stride

    @property
    def points(self) -> list[tuple[np.datetime64, float | None]]:
        """``(window_start, value)`` pairs with None for Undefined windows."""
        return [(t, None if math.isnan(v) else float(v))
                for t, v in zip(self.window_starts, self.values)]

    @property
    def undefined_fraction(self) -> float:
        if len(self) == 0:
            return 1.0
        return float(np.isnan(self.values).mean())

    def same_grid(self, other: "WpeProfile") -> bool:
        return (
            self.start == other.start
            and self.interval == other.interval
            and self.stride == other.stride
            and self.width == other.width
            and len(self) == len(other)
        )

    def __eq__(self, other):
        if not isinstance(other, WpeProfile):
            return NotImplemented
        return (
            self.site_id == other.site_id
            and self.same_grid(other)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def rolling_wpe_profile(
    series: GenerationSeries, cfg: EmbeddingConfig, win: WindowSpec
) -> WpeProfile:
    """WPE over windows starting at sample 0 and advancing by ``win.stride``.

    Codes and weights are computed once for the whole series; each window
    then histograms its own slice, which gives the same numbers as calling
    :func:`~pvwpe.wpe.wpe` on the window's samples.
    """
    x = np.asarray(series.values, dtype=float)
    n_win = win.n_windows(x.size)
    if n_win == 0:
        msg = f"series {series.site_id} has {x.size} samples, fewer than one window ({win.width})"
        log.warning(msg)
        return WpeProfile(series.site_id, series.start, series.interval, win.stride, win.width,
                          np.empty(0), diagnostic=msg)
    if win.width < cfg.span:
        raise ContractError(f"window width {win.width} is shorter than one embedding vector ({cfg.span})")
    if not np.all(np.isfinite(x)):
        raise ContractError(f"series {series.site_id} contains non-finite samples; clean it first")

    codes = embedding_codes(x, cfg)
    weights = embedding_weights(x, cfg)
    n_vec = cfg.n_vectors(win.width)
    n_pat = cfg.n_patterns
    out = np.empty(n_win)
    for k in range(n_win):
        s = k * win.stride
        hist = np.bincount(codes[s:s + n_vec], weights=weights[s:s + n_vec], minlength=n_pat)
        out[k] = entropy_from_histogram(hist, cfg.d).normalized
    return WpeProfile(series.site_id, series.start, series.interval, win.stride, win.width, out)


def profile_all(
    series_set: Sequence[GenerationSeries],
    cfg: EmbeddingConfig,
    win: WindowSpec,
    workers: int = 1,
) -> list[WpeProfile]:
    """Profiles for every series, in input order regardless of ``workers``."""
    win.validate(cfg)
    if workers <= 1 or len(series_set) < 2:
        return [rolling_wpe_profile(s, cfg, win) for s in series_set]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: rolling_wpe_profile(s, cfg, win), series_set))


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outlier_values: tuple[float, ...] = ()

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "BoxStats":
        """Tukey box: whiskers reach the furthest points within 1.5 IQR of the box."""
        v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
        if v.size == 0:
            nan = math.nan
            return cls(nan, nan, nan, nan, nan)
        q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= lo_fence) & (v <= hi_fence)]
        outliers = np.sort(v[(v < lo_fence) | (v > hi_fence)])
        return cls(float(med), float(q1), float(q3), float(inside.min()), float(inside.max()),
                   tuple(float(o) for o in outliers))


@dataclass
class SweepResult:
    cells: dict[tuple[int, int], BoxStats] = field(default_factory=dict)
    values: dict[tuple[int, int], dict[str, float]] = field(default_factory=dict)

    def iqr(self, d: int, tau: int) -> float:
        return self.cells[(d, tau)].iqr


def whole_series_wpe(series: GenerationSeries, cfg: EmbeddingConfig) -> float:
    return wpe(series.values, cfg, warn=False).normalized


def hyperparameter_sweep(
    series_set: Sequence[GenerationSeries],
    grid: Iterable[EmbeddingConfig] = DEFAULT_GRID,
) -> SweepResult:
    """Whole-series WPE per site for each grid cell, summarised as box statistics."""
    grid = list(grid)
    if not grid:
        raise ContractError("empty parameter grid")
    if not series_set:
        raise ContractError("empty series set")
    d_max = max(c.d for c in grid)
    short = [s.site_id for s in series_set if len(s.values) <= 5 * math.factorial(d_max)]
    if short:
        warnings.warn(f"{len(short)} series do not satisfy N > 5*d! for d={d_max}",
                      ShortWindowWarning, stacklevel=2)
    result = SweepResult()
    for cfg in grid:
        per_site = {s.site_id: whole_series_wpe(s, cfg) for s in series_set}
        key = (cfg.d, cfg.tau)
        result.values[key] = per_site
        result.cells[key] = BoxStats.from_values(per_site.values())
    return result


# -- export ------------------------------------------------------------------

def write_profiles_csv(profiles: Iterable[WpeProfile], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_HEADER)
        for p in profiles:
            for t, v in zip(format_timestamps(p.window_starts), p.values):
                w.writerow((p.site_id, t, "NaN" if math.isnan(v) else repr(float(v))))


def read_profiles_csv(path: str | Path, interval: np.timedelta64, width: int) -> list[WpeProfile]:
    """Rebuild profiles from CSV; stride is recovered from the window spacing."""
    rows: dict[str, list[tuple[np.datetime64, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != PROFILE_HEADER:
            raise ContractError(f"unexpected profile header {header}")
        for site, t, v in reader:
            rows.setdefault(site, []).append((parse_timestamp(t), float(v)))
    out = []
    for site, pts in rows.items():
        starts = np.array([t for t, _ in pts])
        if starts.size > 1:
            step = np.diff(starts)
            if not np.all(step == step[0]) or step[0] <= np.timedelta64(0, "s"):
                raise ContractError(f"profile {site}: window starts are not evenly spaced")
            stride = int(step[0] // interval)
        else:
            stride = 1
        out.append(WpeProfile(site, starts[0], interval, stride, width,
                              np.array([v for _, v in pts], dtype=float)))
    return out


def profiles_to_json(profiles: Iterable[WpeProfile]) -> str:
    doc = []
    for p in profiles:
        doc.append({
            "site_id": p.site_id,
            "width": p.width,
            "stride": p.stride,
            "interval_seconds": int(p.interval / np.timedelta64(1, "s")),
            "window_start": format_timestamps(p.window_starts),
            "wpe": [None if math.isnan(v) else float(v) for v in p.values],
        })
    return json.dumps(doc, indent=1)


def profiles_from_json(text: str) -> list[WpeProfile]:
    out = []
    for item in json.loads(text):
        interval = np.timedelta64(item["interval_seconds"], "s")
        starts = item["window_start"]
        vals = np.array([math.nan if v is None else v for v in item["wpe"]], dtype=float)
        start = parse_timestamp(starts[0]) if starts else np.datetime64("1970-01-01T00:00:00")
        out.append(WpeProfile(item["site_id"], start, interval, item["stride"], item["width"], vals))
    return out


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for (d, tau), b in sorted(result.cells.items()):
            w.writerow((d, tau, repr(b.median), repr(b.q1), repr(b.q3),
                        repr(b.whisker_low), repr(b.whisker_high), len(b.outlier_values)))


def read_sweep_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SWEEP_HEADER:
            raise ContractError(f"unexpected sweep header {reader.fieldnames}")
        rows = []
        for r in reader:
            rows.append({
                "d": int(r["d"]), "tau": int(r["tau"]), "n_outliers": int(r["n_outliers"]),
                **{k: float(r[k]) for k in SWEEP_HEADER[2:7]},
            })
    return rows
