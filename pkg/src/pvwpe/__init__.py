"""Weighted permutation entropy profiles and anomaly detection for rooftop PV fleets."""
from .detector import (
    AnomalyLocalization,
    Direction,
    FixedThreshold,
    IqrOutlier,
    RegionAnalysis,
    Verdict,
    analyze_region,
    correlate,
    flag_outliers,
    localize,
    mean_profile,
    summarize_generation,
)
from .ingest import CleaningPolicy, Excluded, clean, group_by_region, load_csv, normalize_per_unit
from .profiler import WindowSpec, WpeProfile, hyperparameter_sweep, rolling_wpe_profile
from .report import RegionReport, build_report
from .series import GenerationSeries
from .wpe import ContractError, EmbeddingConfig, ShortWindowWarning, WpeValue, wpe

__version__ = "0.1.0"

__all__ = [
    "AnomalyLocalization",
    "CleaningPolicy",
    "ContractError",
    "Direction",
    "EmbeddingConfig",
    "Excluded",
    "FixedThreshold",
    "GenerationSeries",
    "IqrOutlier",
    "RegionAnalysis",
    "RegionReport",
    "ShortWindowWarning",
    "Verdict",
    "WindowSpec",
    "WpeProfile",
    "WpeValue",
    "analyze_region",
    "build_report",
    "clean",
    "correlate",
    "flag_outliers",
    "group_by_region",
    "hyperparameter_sweep",
    "load_csv",
    "localize",
    "mean_profile",
    "normalize_per_unit",
    "rolling_wpe_profile",
    "summarize_generation",
    "wpe",
]
