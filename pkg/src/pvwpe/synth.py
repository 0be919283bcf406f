"""Synthetic regional PV fleets with injectable faults.

Every site is a clear-sky envelope multiplied by a cloud attenuation process
shared across the region (each site sees it with a small lag) and by a
little per-site multiplicative jitter. Randomness comes only from
``numpy.random.Generator(PCG64(seed))`` and only through ``random()``
uniform doubles, whose stream is fixed for a given seed.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .series import GenerationSeries
from .wpe import ContractError

QUANTUM = 1e-6


class FaultKind(str, enum.Enum):
    PARTIAL_SHADING = "partial_shading"
    CURTAILMENT_CLIPPING = "curtailment_clipping"
    RAPID_FLUCTUATION = "rapid_fluctuation"
    DEAD_OUTPUT = "dead_output"


@dataclass(frozen=True)
class FaultSpec:
    """A fault on ``site_id`` over ``[start, end)``.

    ``band`` is the daily shading window in hours (partial shading only).
    """

    site_id: str
    kind: FaultKind
    start: np.datetime64
    end: np.datetime64
    severity: float = 0.5
    band: tuple[float, float] = (8.0, 16.0)
    taper: float = 2.0
    flutter: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind(self.kind))
        object.__setattr__(self, "start", np.datetime64(self.start, "s"))
        object.__setattr__(self, "end", np.datetime64(self.end, "s"))
        object.__setattr__(self, "band", tuple(float(h) for h in self.band))
        if not 0.0 <= self.severity <= 1.0:
            raise ContractError(f"fault severity must be in [0, 1], got {self.severity}")
        if self.end <= self.start:
            raise ContractError("fault interval is empty")

    def to_dict(self) -> dict:
        return {
            "site_id": self.site_id,
            "kind": self.kind.value,
            "start": str(self.start),
            "end": str(self.end),
            "severity": self.severity,
            "band": list(self.band),
            "taper": self.taper,
            "flutter": self.flutter,
        }


@dataclass(frozen=True)
class FleetSpec:
    """One region's fleet.

    ``latitude`` (degrees, negative south) shapes the seasonal daylight
    curve; ``cloud_seasonality`` scales how much cloudier the winter is.
    Per-site differences come from ``noon_spread`` (minutes of solar-noon
    offset), ``max_lag``, ``gain_range``, ``local_variability``,
    ``per_site_noise`` and ``enhancement_max``; zero them all and every
    site is the same series.
    """

    n_sites: int = 23
    start: str = "2019-01-01T00:00:00"
    days: int = 365
    interval_minutes: int = 5
    latitude: float = -34.9
    weather_seed: int = 2019
    site_seed: int = 7
    per_site_noise: float = 0.004
    local_variability: float = 0.04
    local_rho: float = 0.85
    cloud_base: float = 0.2
    cloud_seasonality: float = 0.1
    cloud_day_spread: float = 0.25
    cloud_intensity: float = 4.0
    gain_range: tuple[float, float] = (0.85, 1.15)
    enhancement_max: float = 0.3
    enhancement_events: int = 1
    max_lag: int = 2
    noon_spread: float = 40.0
    region_id: str = "5000-5100"
    site_prefix: str = "S"
    postcodes: tuple[str, ...] = ()
    faults: tuple[FaultSpec, ...] = ()

    def __post_init__(self):
        if self.n_sites < 2:
            raise ContractError("a fleet needs at least 2 sites")
        if self.interval_minutes <= 0 or (24 * 60) % self.interval_minutes:
            raise ContractError("interval must divide one day evenly")
        if self.days < 1:
            raise ContractError("fleet span must be at least one day")
        if self.postcodes and len(self.postcodes) != self.n_sites:
            raise ContractError("postcodes must list one entry per site")
        ids = set(self.site_ids)
        t0 = np.datetime64(self.start, "s")
        t1 = t0 + np.timedelta64(self.days, "D")
        for f in self.faults:
            if f.site_id not in ids:
                raise ContractError(f"fault targets unknown site {f.site_id}")
            if f.start < t0 or f.end > t1:
                raise ContractError(f"fault on {f.site_id} lies outside the fleet span")

    @property
    def site_ids(self) -> list[str]:
        return [f"{self.site_prefix}{i:03d}" for i in range(self.n_sites)]

    @property
    def samples_per_day(self) -> int:
        return 24 * 60 // self.interval_minutes

    @property
    def interval(self) -> np.timedelta64:
        return np.timedelta64(self.interval_minutes * 60, "s")

    def postcode_of(self, i: int) -> str:
        if self.postcodes:
            return self.postcodes[i]
        lo = self.region_id.split("-")[0]
        return lo


def default_fleet_spec() -> FleetSpec:
    """The frozen 23-site fixture: 20 normal sites and 3 faulted ones."""
    return FleetSpec(
        faults=(
            FaultSpec("S015", FaultKind.CURTAILMENT_CLIPPING, "2019-03-01", "2019-06-01", 0.2,
                      flutter=0.06),
            FaultSpec("S012", FaultKind.PARTIAL_SHADING, "2019-09-01", "2019-12-01", 0.4),
            FaultSpec("S020", FaultKind.RAPID_FLUCTUATION, "2019-06-01", "2019-09-01", 0.16),
        ),
    )


def regional_fleet_specs(sites_per_region: int = 35) -> list[FleetSpec]:
    """Three regions (5000-5100, 5203-5255, 5540), 105 sites by default."""
    n = sites_per_region
    a = default_fleet_spec()
    return [
        replace(a, n_sites=n, site_prefix="A", weather_seed=2019,
                faults=tuple(replace(f, site_id="A" + f.site_id[1:]) for f in a.faults
                             if int(f.site_id[1:]) < n)),
        replace(a, n_sites=n, site_prefix="B", weather_seed=2020, region_id="5203-5255",
                latitude=-34.6, site_seed=8,
                faults=(FaultSpec(f"B{n - 1:03d}", FaultKind.CURTAILMENT_CLIPPING,
                                  "2019-02-01", "2019-11-01", 0.3),)),
        replace(a, n_sites=n, site_prefix="C", weather_seed=2021, region_id="5540",
                latitude=-33.2, site_seed=9,
                faults=(FaultSpec(f"C{n - 1:03d}", FaultKind.RAPID_FLUCTUATION,
                                  "2019-09-01", "2019-12-01", 0.4),)),
    ]


# -- weather -----------------------------------------------------------------

def _day_of_year(spec: FleetSpec) -> np.ndarray:
    t0 = np.datetime64(spec.start, "D")
    days = t0 + np.arange(spec.days)
    return (days - days.astype("datetime64[Y]")).astype(int) + 1


def clear_sky(spec: FleetSpec, noon_shift_minutes: float = 0.0) -> np.ndarray:
    """Sine of solar elevation, zero below the horizon, shape ``(days * spd,)``."""
    spd = spec.samples_per_day
    doy = _day_of_year(spec)[:, None]
    hours = (np.arange(spd)[None, :] + 0.5) * spec.interval_minutes / 60.0
    decl = np.radians(23.45) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    lat = np.radians(spec.latitude)
    hour_angle = np.radians(15.0 * (hours - 12.0 - noon_shift_minutes / 60.0))
    s = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(hour_angle)
    return np.clip(s, 0.0, None).ravel()


def _ar1(shocks: np.ndarray, rho: float) -> np.ndarray:
    return lfilter([1.0 - rho], [1.0, -rho], shocks)


def cloud_process(spec: FleetSpec, rng: np.random.Generator) -> np.ndarray:
    """Bounded multiplicative attenuation in (0, 1], one value per sample.

    A daily cloudiness level (AR(1) over days, cloudier around the June
    solstice) scales an intraday mean-reverting process driven by uniform
    shocks.
    """
    spd = spec.samples_per_day
    doy = _day_of_year(spec)
    season = 0.5 * (1 + np.cos(2 * np.pi * (doy - 172) / 365.0))  # 1 at midwinter
    base = spec.cloud_base + spec.cloud_seasonality * season
    daily = _ar1(rng.random(spec.days) - 0.5, 0.5) * 2.0 * spec.cloud_day_spread
    level = np.clip(base + daily, 0.0, 0.95)
    intraday = np.clip(0.5 + _ar1(rng.random(spec.days * spd) - 0.5, 0.85) * spec.cloud_intensity, 0.0, 1.0)
    return 1.0 - np.repeat(level, spd) * intraday


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.rint(x * 1e6) / 1e6


def per_unit(values: np.ndarray) -> np.ndarray:
    peak = values.max()
    return values / peak if peak > 0 else values.copy()


def _enhance(x: np.ndarray, env: np.ndarray, cloud: np.ndarray, size: float, events: int) -> None:
    """Cloud-edge enhancement: brief overshoots where the sky clears suddenly.

    Applied in place to the ``events`` sunniest clearing samples; this moves
    the site's annual peak (and so its per-unit mean) without touching more
    than a handful of embedding vectors.
    """
    if size <= 0 or events <= 0:
        return
    clearing = np.zeros_like(x)
    clearing[1:] = np.clip(np.diff(cloud), 0.0, None) * env[1:]
    idx = np.argsort(clearing, kind="stable")[-events:]
    x[idx] *= 1.0 + size


def generate_fleet(spec: FleetSpec | None = None) -> list[GenerationSeries]:
    """Per-unit series for every site in ``spec``, faults applied."""
    spec = spec or default_fleet_spec()
    weather_rng = np.random.Generator(np.random.PCG64(spec.weather_seed))
    site_rng = np.random.Generator(np.random.PCG64(spec.site_seed))
    cloud = cloud_process(spec, weather_rng)
    n = cloud.size
    start = np.datetime64(spec.start, "s")
    faults_by_site: dict[str, list[FaultSpec]] = {}
    for f in spec.faults:
        faults_by_site.setdefault(f.site_id, []).append(f)

    out = []
    for i, site in enumerate(spec.site_ids):
        p = site_rng.random(6)
        shift = (p[0] - 0.5) * spec.noon_spread
        lag = int(p[1] * (spec.max_lag + 1))
        gain = spec.gain_range[0] + (spec.gain_range[1] - spec.gain_range[0]) * p[2]
        local_amp = spec.local_variability * (0.25 + 0.75 * p[3])
        env = clear_sky(spec, shift) ** gain
        c = np.concatenate([np.full(lag, cloud[0]), cloud[:n - lag]]) if lag else cloud
        local = 1.0 + local_amp * _ar1(site_rng.random(n) - 0.5, spec.local_rho) * 2.0 / math.sqrt(
            (1 - spec.local_rho) / (1 + spec.local_rho))
        jitter = 1.0 + spec.per_site_noise * (2.0 * site_rng.random(n) - 1.0)
        x = np.clip(env * c * local * jitter, 0.0, None)
        _enhance(x, env, c, spec.enhancement_max * p[4], spec.enhancement_events)
        series = GenerationSeries(site, spec.postcode_of(i), start, per_unit(x),
                                  spec.interval, per_unit=True)
        for f in faults_by_site.get(site, ()):
            series = inject(series, f, np.random.Generator(np.random.PCG64(
                [spec.site_seed, i, list(FaultKind).index(f.kind)])))
        series.values = _quantize(per_unit(series.values))
        out.append(series)
    return out


def generate_fleets(specs: Sequence[FleetSpec]) -> list[GenerationSeries]:
    out = []
    for s in specs:
        out.extend(generate_fleet(s))
    return out


# -- faults ------------------------------------------------------------------

def _daily_view(x: np.ndarray, spd: int) -> np.ndarray:
    return x.reshape(-1, spd)


def inject(
    series: GenerationSeries, fault: FaultSpec, rng: np.random.Generator | None = None
) -> GenerationSeries:
    """Return a copy of ``series`` with ``fault`` applied over its interval."""
    if fault.start < series.start or fault.end > series.end:
        raise ContractError(f"fault interval lies outside series {series.site_id}")
    x = series.values.copy()
    if fault.severity == 0 and fault.kind is not FaultKind.DEAD_OUTPUT:
        return series.with_values(x)
    rng = rng or np.random.Generator(np.random.PCG64(0))
    i0, i1 = series.index_of(fault.start), series.index_of(fault.end)
    spd = series.samples_per_day
    seg = x[i0:i1]
    sev = fault.severity
    offsets = np.arange(i0, i1) % spd
    hour = offsets * (series.interval / np.timedelta64(1, "h"))
    day_id = np.arange(i0, i1) // spd

    if fault.kind is FaultKind.DEAD_OUTPUT:
        seg[:] = 0.0
    elif fault.kind is FaultKind.PARTIAL_SHADING:
        seg *= 1.0 - sev * _shading_profile(hour, fault.band, fault.taper)
    elif fault.kind is FaultKind.RAPID_FLUCTUATION:
        day = seg > 0
        seg[day] *= 1.0 - sev * rng.random(int(day.sum()))
    elif fault.kind is FaultKind.CURTAILMENT_CLIPPING:
        # per-day cap at (1 - severity) of that day's peak, flutter where uncapped
        d = day_id - day_id.min()
        peak = np.zeros(d.max() + 1)
        np.maximum.at(peak, d, seg)
        cap = (1.0 - sev) * peak[d]
        lit = seg > 0
        clipped = lit & (seg >= cap)
        free = lit & ~clipped
        flutter = fault.flutter * peak[d] * (2.0 * rng.random(seg.size) - 1.0)
        seg[free] = np.clip(seg[free] + flutter[free], 0.0, cap[free])
        seg[clipped] = cap[clipped]
    x[i0:i1] = seg
    return series.with_values(x)


def _shading_profile(hour: np.ndarray, band: tuple[float, float], taper: float) -> np.ndarray:
    """1 inside ``band``, raised-cosine ramps of ``taper`` hours inside each edge."""
    lo, hi = band
    w = np.zeros_like(hour, dtype=float)
    inside = (hour >= lo) & (hour < hi)
    w[inside] = 1.0
    if taper > 0:
        ramp = np.clip(np.minimum(hour - lo, hi - hour) / taper, 0.0, 1.0)
        w[inside] = 0.5 - 0.5 * np.cos(np.pi * ramp[inside])
    return w


def fault_mask(series: GenerationSeries, fault: FaultSpec) -> np.ndarray:
    m = np.zeros(len(series), dtype=bool)
    m[series.index_of(fault.start):series.index_of(fault.end)] = True
    return m


# -- spec files --------------------------------------------------------------

_TUPLE_FIELDS = {"gain_range", "postcodes"}


def fleet_spec_from_dict(doc: dict) -> FleetSpec:
    """Build a spec from a parsed TOML/JSON mapping.

    Unknown keys are rejected. ``faults`` is a list of tables with the
    :class:`FaultSpec` field names; ``preset = "default"`` starts from the
    frozen fixture instead of the bare defaults.
    """
    doc = dict(doc)
    base = default_fleet_spec() if doc.pop("preset", None) == "default" else FleetSpec()
    known = {f for f in FleetSpec.__dataclass_fields__}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ContractError(f"unknown fleet spec keys: {', '.join(unknown)}")
    if "faults" in doc:
        faults = []
        for item in doc["faults"]:
            item = dict(item)
            if "band" in item:
                item["band"] = tuple(item["band"])
            try:
                faults.append(FaultSpec(**item))
            except TypeError as exc:
                raise ContractError(f"bad fault entry {item}: {exc}") from None
        doc["faults"] = tuple(faults)
    for k in _TUPLE_FIELDS & set(doc):
        doc[k] = tuple(doc[k])
    return replace(base, **doc)


def faults_to_json(faults: Sequence[FaultSpec]) -> str:
    return json.dumps([f.to_dict() for f in faults], indent=2) + "\n"


def faults_from_json(text: str) -> list[FaultSpec]:
    return [FaultSpec(**item) for item in json.loads(text)]
