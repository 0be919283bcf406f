"""CSV loading, gap cleaning, per-unit normalisation and region grouping."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .series import FIVE_MINUTES, GenerationSeries, format_timestamps
from .wpe import ContractError

log = logging.getLogger(__name__)

LONG_HEADER = ("site_id", "postcode", "timestamp", "power")
SIDECAR_HEADER = ("site_id", "postcode")


class InputError(ContractError):
    """Malformed input file; the message carries the file and line."""


@dataclass(frozen=True)
class Excluded:
    site_id: str
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class Keep:
    site_id: str


@dataclass(frozen=True)
class CleaningPolicy:
    max_missing: int = 200
    leading_fill: float = 0.0
    normalize: bool = True


@dataclass(frozen=True)
class CurtailmentPolicy:
    """Thresholds for the curtailment heuristic.

    A month counts against a site when it has a sample below ``-epsilon``,
    or when at least ``min_days`` of its days contain a midday run of
    ``run`` samples that stays within ``delta`` and below ``1 - delta``.
    """

    epsilon: float = 0.01
    max_months: int = 7
    run: int = 12
    delta: float = 0.005
    midday: tuple[float, float] = (10.0, 14.0)
    min_days: int = 3
    floor: float = 0.05


@dataclass(frozen=True)
class RegionGroup:
    region_id: str
    site_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.site_ids:
            raise ContractError(f"region {self.region_id} is empty")


# -- loading -----------------------------------------------------------------

def _utc_seconds(text: pd.Series) -> pd.Series:
    t = pd.to_datetime(text, format="ISO8601", errors="coerce", utc=True)
    return t.dt.tz_localize(None)


def _bad_line(path, row: int, msg: str) -> InputError:
    # header is line 1
    return InputError(f"{path}:{row + 2}: {msg}")


def _assemble(path, site: str, postcode: str, times: np.ndarray, values: np.ndarray,
              rows: np.ndarray, interval: np.timedelta64) -> GenerationSeries:
    order = np.argsort(times, kind="stable")
    times, values, rows = times[order], values[order], rows[order]
    offsets = (times - times[0]) / interval
    if not np.all(offsets == np.floor(offsets)):
        bad = int(np.flatnonzero(offsets != np.floor(offsets))[0])
        raise InputError(
            f"{path}: site {site} is not sampled on a {interval} grid (line {rows[bad] + 2})")
    idx = offsets.astype(np.int64)
    out = np.full(int(idx[-1]) + 1, math.nan)
    out[idx] = values
    return GenerationSeries(site, postcode, times[0], out, interval)


def load_csv(
    path: str | Path,
    fmt: str = "long",
    *,
    interval: np.timedelta64 = FIVE_MINUTES,
    sidecar: str | Path | None = None,
) -> list[GenerationSeries]:
    """Read generation series from a long or wide CSV file.

    Rows absent from the file and empty ``power`` fields both become NaN
    gaps. Timestamps carrying an offset are converted to UTC. The result
    is ordered by site id.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    interval = np.timedelta64(interval, "s")
    if fmt == "long":
        series = _load_long(path, interval)
    elif fmt == "wide":
        series = _load_wide(path, interval, sidecar)
    else:
        raise ContractError(f"unknown input format {fmt!r}")
    return sorted(series, key=lambda s: s.site_id)


def _numeric(path, col: pd.Series) -> np.ndarray:
    text = col.fillna("").str.strip()
    num = pd.to_numeric(text.where(text != ""), errors="coerce")
    bad = num.isna() & (text != "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise _bad_line(path, row, f"cannot parse power value {text.iloc[row]!r}")
    return num.to_numpy(dtype=float)


def _load_long(path: Path, interval: np.timedelta64) -> list[GenerationSeries]:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if tuple(df.columns) != LONG_HEADER:
        raise InputError(f"{path}:1: expected header {','.join(LONG_HEADER)}")
    if df.empty:
        raise InputError(f"{path}: no data rows")
    for col in ("site_id", "timestamp"):
        blank = df[col].str.strip() == ""
        if blank.any():
            raise _bad_line(path, int(np.flatnonzero(blank.to_numpy())[0]), f"empty {col}")
    times = _utc_seconds(df["timestamp"])
    if times.isna().any():
        row = int(np.flatnonzero(times.isna().to_numpy())[0])
        raise _bad_line(path, row, f"cannot parse timestamp {df['timestamp'].iloc[row]!r}")
    values = _numeric(path, df["power"])
    dup = df.assign(_t=times).duplicated(["site_id", "_t"], keep="first").to_numpy()
    if dup.any():
        row = int(np.flatnonzero(dup)[0])
        raise _bad_line(path, row, f"duplicate timestamp {df['timestamp'].iloc[row]} "
                                   f"for site {df['site_id'].iloc[row]}")
    tarr = times.to_numpy().astype("datetime64[s]")
    out = []
    for site, rows in df.groupby("site_id", sort=False).indices.items():
        codes = df["postcode"].iloc[rows].unique()
        if len(codes) != 1:
            raise InputError(f"{path}: site {site} has more than one postcode {sorted(codes)}")
        out.append(_assemble(path, site, codes[0], tarr[rows], values[rows], rows, interval))
    return out


def _load_wide(path: Path, interval: np.timedelta64, sidecar) -> list[GenerationSeries]:
    postcodes: dict[str, str] = {}
    if sidecar is not None:
        meta = pd.read_csv(sidecar, dtype=str, keep_default_na=False)
        if tuple(meta.columns) != SIDECAR_HEADER:
            raise InputError(f"{sidecar}:1: expected header {','.join(SIDECAR_HEADER)}")
        postcodes = dict(zip(meta["site_id"], meta["postcode"]))
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if df.shape[1] < 2 or df.empty:
        raise InputError(f"{path}: expected a timestamp column and at least one site column")
    tcol = df.columns[0]
    times = _utc_seconds(df[tcol])
    if times.isna().any():
        row = int(np.flatnonzero(times.isna().to_numpy())[0])
        raise _bad_line(path, row, f"cannot parse timestamp {df[tcol].iloc[row]!r}")
    dup = times.duplicated().to_numpy()
    if dup.any():
        row = int(np.flatnonzero(dup)[0])
        raise _bad_line(path, row, f"duplicate timestamp {df[tcol].iloc[row]}")
    tarr = times.to_numpy().astype("datetime64[s]")
    rows = np.arange(len(df))
    out = []
    for site in df.columns[1:]:
        if sidecar is not None and site not in postcodes:
            raise InputError(f"{sidecar}: no postcode for site {site}")
        out.append(_assemble(path, site, postcodes.get(site, ""), tarr,
                             _numeric(path, df[site]), rows, interval))
    return out


def write_long_csv(series_set: Iterable[GenerationSeries], path: str | Path) -> None:
    """Write series in the long format; NaN gaps become empty fields."""
    frames = []
    for s in series_set:
        frames.append(pd.DataFrame({
            "site_id": s.site_id,
            "postcode": s.postcode,
            "timestamp": format_timestamps(s.timestamps),
            "power": s.values,
        }))
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=LONG_HEADER)
    df.to_csv(path, index=False, na_rep="", lineterminator="\n")


# -- cleaning ----------------------------------------------------------------

def locf(values: np.ndarray, leading: float = 0.0) -> np.ndarray:
    """Fill NaNs with the last prior observation (``leading`` before the first)."""
    x = np.asarray(values, dtype=float)
    ok = ~np.isnan(x)
    last = np.maximum.accumulate(np.where(ok, np.arange(x.size), -1))
    out = np.where(last >= 0, x[np.maximum(last, 0)], leading)
    return out


def clean(series: GenerationSeries, policy: CleaningPolicy = CleaningPolicy()) -> GenerationSeries | Excluded:
    gaps = np.isnan(series.values)
    n_missing = int(gaps.sum())
    if n_missing > policy.max_missing:
        return Excluded(series.site_id, "missing",
                        f"{n_missing} missing points exceed the limit of {policy.max_missing}")
    if not np.all(np.isfinite(series.values[~gaps])):
        return Excluded(series.site_id, "non_finite", "infinite values present")
    return series.with_values(locf(series.values, policy.leading_fill),
                              filled_mask=gaps, missing_count=n_missing)


def normalize_per_unit(series: GenerationSeries) -> GenerationSeries | Excluded:
    peak = float(np.max(series.values))
    if not peak > 0:
        return Excluded(series.site_id, "dead", "no positive generation over the span")
    return series.with_values(series.values / peak, per_unit=True)


def _midday_runs(series: GenerationSeries, policy: CurtailmentPolicy) -> np.ndarray:
    """Days (as datetime64[D]) that contain a sub-maximum midday plateau."""
    x = series.values
    r = policy.run
    if x.size < r:
        return np.empty(0, dtype="datetime64[D]")
    ts = series.timestamps
    day = ts.astype("datetime64[D]")
    hour = (ts - day) / np.timedelta64(1, "h")
    mid = (hour >= policy.midday[0]) & (hour < policy.midday[1])
    win = sliding_window_view(x, r)
    flat = (win.max(axis=1) - win.min(axis=1)) <= policy.delta
    level = win.mean(axis=1)
    flat &= (level < 1.0 - policy.delta) & (level > policy.floor)
    inside = sliding_window_view(mid, r).all(axis=1) & (day[:-r + 1 or None] == day[r - 1:])
    return np.unique(day[:len(flat)][flat & inside])


def curtailment_screen(series: GenerationSeries, policy: CurtailmentPolicy = CurtailmentPolicy()) -> Keep | Excluded:
    """Heuristic screen for persistent negative readings or clipped output."""
    month = series.timestamps.astype("datetime64[M]")
    neg_months = np.unique(month[series.values < -policy.epsilon])
    if neg_months.size > policy.max_months:
        return Excluded(series.site_id, "negative",
                        f"negative generation in {neg_months.size} months")
    days = _midday_runs(series, policy)
    if days.size:
        m, counts = np.unique(days.astype("datetime64[M]"), return_counts=True)
        n_clip = int((counts >= policy.min_days).sum())
        if n_clip > policy.max_months:
            return Excluded(series.site_id, "curtailment",
                            f"clipped output in {n_clip} months")
    return Keep(series.site_id)


@dataclass
class CleanResult:
    series: list[GenerationSeries]
    excluded: list[Excluded]


def prepare(
    series_set: Iterable[GenerationSeries],
    policy: CleaningPolicy = CleaningPolicy(),
    curtailment: CurtailmentPolicy | None = CurtailmentPolicy(),
) -> CleanResult:
    """Clean, normalise and screen each series independently."""
    kept, dropped = [], []
    for s in series_set:
        out = clean(s, policy)
        if not isinstance(out, Excluded) and policy.normalize:
            out = normalize_per_unit(out)
        if not isinstance(out, Excluded) and curtailment is not None:
            verdict = curtailment_screen(out, curtailment)
            if isinstance(verdict, Excluded):
                out = verdict
        (dropped if isinstance(out, Excluded) else kept).append(out)
    for e in dropped:
        log.info("excluded %s: %s", e.site_id, e.detail or e.reason)
    return CleanResult(kept, dropped)


# -- regions -----------------------------------------------------------------

def parse_region(text: str) -> tuple[int, int]:
    """``"5000-5100"`` -> (5000, 5100); ``"5540"`` -> (5540, 5540)."""
    parts = text.strip().split("-")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise ContractError(f"bad postcode range {text!r}") from None
    if lo > hi:
        raise ContractError(f"postcode range {text!r} is reversed")
    return lo, hi


def group_by_region(
    series_set: Sequence[GenerationSeries], regions: Sequence[str] | None = None
) -> tuple[list[RegionGroup], list[str]]:
    """Partition sites by the first postcode range containing them.

    Without ``regions`` every site lands in one group called ``all``.
    Returns the non-empty groups and the ids of unmatched sites.
    """
    if not regions:
        ids = tuple(s.site_id for s in series_set)
        return ([RegionGroup("all", ids)] if ids else []), []
    spans = [(r.strip(), *parse_region(r)) for r in regions]
    for i, (a, alo, ahi) in enumerate(spans):
        for b, blo, bhi in spans[i + 1:]:
            if alo <= bhi and blo <= ahi:
                raise ContractError(f"postcode ranges {a} and {b} overlap")
    members: dict[str, list[str]] = {name: [] for name, _, _ in spans}
    unmatched = []
    for s in series_set:
        try:
            code = int(s.postcode)
        except ValueError:
            unmatched.append(s.site_id)
            continue
        for name, lo, hi in spans:
            if lo <= code <= hi:
                members[name].append(s.site_id)
                break
        else:
            unmatched.append(s.site_id)
    groups = []
    for name, ids in members.items():
        if ids:
            groups.append(RegionGroup(name, tuple(ids)))
        else:
            log.warning("region %s matched no sites", name)
    if unmatched:
        log.warning("%d sites matched no region: %s", len(unmatched), ", ".join(unmatched))
    return groups, unmatched
