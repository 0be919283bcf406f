"""Regional mean profile, per-site correlation, outlier rules and localisation."""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .profiler import WpeProfile
from .series import GenerationSeries
from .wpe import ContractError

log = logging.getLogger(__name__)

MEAN_ID = "__mean__"
MIN_JOINT_POINTS = 3
UNDEFINED_LIMIT = 0.25


class Verdict(str, enum.Enum):
    NORMAL = "normal"
    ANOMALOUS = "anomalous"
    INSUFFICIENT = "insufficient"

    @property
    def flagged(self) -> bool:
        return self is not Verdict.NORMAL


class Direction(str, enum.Enum):
    BELOW_MEAN = "below_mean"
    ABOVE_MEAN = "above_mean"
    MIXED = "mixed"


@dataclass(frozen=True)
class FixedThreshold:
    theta: float = 0.8
    min_sites = 2

    @property
    def name(self) -> str:
        return f"fixed_threshold({self.theta!r})"


@dataclass(frozen=True)
class IqrOutlier:
    """Flag correlations more than one IQR below the first quartile."""

    min_sites = 8

    @property
    def name(self) -> str:
        return "iqr_outlier"


Rule = FixedThreshold | IqrOutlier


def parse_rule(text: str) -> Rule:
    text = text.strip()
    if text == "iqr_outlier":
        return IqrOutlier()
    if text.startswith("fixed_threshold(") and text.endswith(")"):
        return FixedThreshold(float(text[len("fixed_threshold("):-1]))
    raise ContractError(f"unknown detection rule {text!r}")


@dataclass
class RegionAnalysis:
    region_id: str
    mean_profile: WpeProfile
    correlations: dict[str, float | None]
    verdicts: dict[str, Verdict]
    rule: Rule
    profiles: dict[str, WpeProfile] = field(default_factory=dict, repr=False)

    @property
    def anomalous(self) -> list[str]:
        return sorted(s for s, v in self.verdicts.items() if v.flagged)


@dataclass
class AnomalyLocalization:
    site_id: str
    divergent_windows: list[tuple[np.datetime64, float]]
    direction: Direction | None
    window_indices: list[int] = field(default_factory=list, repr=False)


def _check_grid(profiles: Sequence[WpeProfile]) -> None:
    ref = profiles[0]
    for p in profiles[1:]:
        if not p.same_grid(ref):
            raise ContractError(
                f"profile {p.site_id} has a different window grid from {ref.site_id}"
            )


def mean_profile(profiles: Sequence[WpeProfile], site_id: str = MEAN_ID) -> WpeProfile:
    """Pointwise mean over sites, skipping Undefined values."""
    if len(profiles) < 2:
        raise ContractError("a mean profile needs at least 2 profiles")
    _check_grid(profiles)
    stack = np.vstack([p.values for p in profiles])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        values = np.nanmean(stack, axis=0)
    ref = profiles[0]
    return WpeProfile(site_id, ref.start, ref.interval, ref.stride, ref.width, values)


def regional_spread(profiles: Sequence[WpeProfile]) -> np.ndarray:
    """Per-window population standard deviation across sites."""
    _check_grid(profiles)
    stack = np.vstack([p.values for p in profiles])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanstd(stack, axis=0)


def correlate(profile: WpeProfile, mean: WpeProfile, method: str = "pearson") -> float | None:
    """Correlation over windows where both profiles are defined.

    Returns None (Insufficient) with fewer than 3 joint points or when
    either side is constant.
    """
    if not profile.same_grid(mean):
        raise ContractError(f"profile {profile.site_id} does not share the mean profile's grid")
    ok = ~(np.isnan(profile.values) | np.isnan(mean.values))
    if ok.sum() < MIN_JOINT_POINTS:
        return None
    a, b = profile.values[ok], mean.values[ok]
    if method == "spearman":
        a, b = rankdata(a), rankdata(b)
    elif method != "pearson":
        raise ContractError(f"unknown correlation method {method!r}")
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if den == 0.0:
        return None
    return max(-1.0, min(1.0, float(np.dot(a, b)) / den))


def flag_outliers(correlations: Mapping[str, float | None], rule: Rule) -> dict[str, Verdict]:
    if len(correlations) < rule.min_sites:
        other = "fixed_threshold" if isinstance(rule, IqrOutlier) else "iqr_outlier"
        raise ContractError(
            f"{rule.name} needs at least {rule.min_sites} sites, got {len(correlations)}; "
            f"consider {other}"
        )
    defined = {s: c for s, c in correlations.items() if c is not None}
    if isinstance(rule, FixedThreshold):
        cutoff = rule.theta
    else:
        if defined:
            q1, q3 = np.quantile(np.fromiter(defined.values(), float), [0.25, 0.75])
            cutoff = q1 - (q3 - q1)
        else:
            cutoff = -math.inf
    out = {}
    for site, c in correlations.items():
        if c is None:
            out[site] = Verdict.INSUFFICIENT
        else:
            out[site] = Verdict.ANOMALOUS if c < cutoff else Verdict.NORMAL
    return out


def analyze_region(
    region_id: str,
    profiles: Sequence[WpeProfile],
    rule: Rule = FixedThreshold(),
    *,
    method: str = "pearson",
    leave_one_out: bool = False,
    undefined_limit: float = UNDEFINED_LIMIT,
) -> RegionAnalysis:
    """Mean profile, correlations and verdicts for one region."""
    mean = mean_profile(profiles)
    corrs: dict[str, float | None] = {}
    for i, p in enumerate(profiles):
        if p.undefined_fraction > undefined_limit:
            corrs[p.site_id] = None
            continue
        ref = mean
        if leave_one_out:
            ref = mean_profile([q for j, q in enumerate(profiles) if j != i])
        corrs[p.site_id] = correlate(p, ref, method)
    verdicts = flag_outliers(corrs, rule)
    # Insufficient survives even where the correlation itself would pass
    for p in profiles:
        if p.undefined_fraction > undefined_limit:
            verdicts[p.site_id] = Verdict.INSUFFICIENT
    return RegionAnalysis(region_id, mean, corrs, verdicts, rule,
                          profiles={p.site_id: p for p in profiles})


def localize(
    profile: WpeProfile,
    mean: WpeProfile,
    band: float = 2.0,
    spread: np.ndarray | None = None,
) -> AnomalyLocalization:
    """Windows where ``|profile - mean|`` exceeds ``band`` regional standard deviations.

    ``spread`` is the per-window standard deviation across the region's
    sites (see :func:`regional_spread`); without it every nonzero deviation
    counts.
    """
    if band <= 0:
        raise ContractError(f"band must be positive, got {band}")
    if not profile.same_grid(mean):
        raise ContractError(f"profile {profile.site_id} does not share the mean profile's grid")
    dev = profile.values - mean.values
    limit = band * (np.zeros(len(mean)) if spread is None else np.asarray(spread, dtype=float))
    with np.errstate(invalid="ignore"):
        hit = np.abs(dev) > limit
    hit &= ~np.isnan(dev)
    idx = np.flatnonzero(hit)
    starts = profile.window_starts
    windows = [(starts[i], float(dev[i])) for i in idx]
    if idx.size == 0:
        direction = None
    elif np.all(dev[idx] > 0):
        direction = Direction.ABOVE_MEAN
    elif np.all(dev[idx] < 0):
        direction = Direction.BELOW_MEAN
    else:
        direction = Direction.MIXED
    return AnomalyLocalization(profile.site_id, windows, direction, [int(i) for i in idx])


def localize_region(analysis: RegionAnalysis, band: float = 2.0) -> dict[str, AnomalyLocalization]:
    profiles = list(analysis.profiles.values())
    spread = regional_spread(profiles)
    return {p.site_id: localize(p, analysis.mean_profile, band, spread) for p in profiles}


def localized_mask(loc: AnomalyLocalization, profile: WpeProfile, n_samples: int) -> np.ndarray:
    """Sample mask attributing each flagged window to its central stride slot.

    A window's deviation is largest when the anomaly sits in its middle, so
    the central ``stride`` samples are where the window localises it.
    """
    mask = np.zeros(n_samples, dtype=bool)
    half = profile.width // 2 - profile.stride // 2
    for i in loc.window_indices:
        lo = i * profile.stride + half
        mask[max(lo, 0):max(min(lo + profile.stride, n_samples), 0)] = True
    return mask


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


@dataclass(frozen=True)
class GenerationSummary:
    """Per-site mean per-unit generation with regional context."""

    site_means: dict[str, float]
    mean: float
    q1: float
    median: float
    q3: float

    def within_iqr(self, site_id: str) -> bool:
        return self.q1 <= self.site_means[site_id] <= self.q3


def summarize_generation(series_set: Iterable[GenerationSeries]) -> GenerationSummary:
    means = {s.site_id: float(np.mean(s.values)) for s in series_set}
    if not means:
        nan = math.nan
        return GenerationSummary({}, nan, nan, nan, nan)
    v = np.fromiter(means.values(), float)
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return GenerationSummary(means, float(v.mean()), float(q1), float(med), float(q3))
