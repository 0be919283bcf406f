"""Generation time series container and timestamp helpers."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

FIVE_MINUTES = np.timedelta64(300, "s")


def parse_timestamp(text: str) -> np.datetime64:
    """ISO-8601 to second-resolution datetime64 (no timezone handling)."""
    return np.datetime64(text.strip().replace(" ", "T"), "s")


def format_timestamps(times: np.ndarray) -> list[str]:
    return list(np.datetime_as_string(np.asarray(times, dtype="datetime64[s]"), unit="s"))


@dataclass(eq=False)
class GenerationSeries:
    """One site's generation on a uniform time grid.

    ``values`` holds NaN at raw gaps until the series is cleaned;
    ``filled_mask`` marks the positions that cleaning filled.
    """

    site_id: str
    postcode: str
    start: np.datetime64
    values: np.ndarray
    interval: np.timedelta64 = FIVE_MINUTES
    missing_count: int = 0
    filled_mask: np.ndarray | None = None
    per_unit: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError(f"series {self.site_id}: values must be a non-empty 1-d array")
        self.start = np.datetime64(self.start, "s")
        self.interval = np.timedelta64(self.interval, "s")
        if self.filled_mask is None:
            self.filled_mask = np.zeros(self.values.size, dtype=bool)
        if not self.missing_count:
            self.missing_count = int(np.isnan(self.values).sum() + self.filled_mask.sum())

    def __len__(self):
        return int(self.values.size)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + np.arange(self.values.size) * self.interval

    @property
    def end(self) -> np.datetime64:
        """Timestamp one interval past the last sample."""
        return self.start + self.values.size * self.interval

    @property
    def samples_per_day(self) -> int:
        return int(np.timedelta64(1, "D") // self.interval)

    def index_of(self, t) -> int:
        """Sample index of timestamp ``t`` (floored to the grid)."""
        return int((np.datetime64(t, "s") - self.start) // self.interval)

    def with_values(self, values: np.ndarray, **changes) -> "GenerationSeries":
        return replace(self, values=np.asarray(values, dtype=float), **changes)

    def __eq__(self, other):
        if not isinstance(other, GenerationSeries):
            return NotImplemented
        return (
            self.site_id == other.site_id
            and self.postcode == other.postcode
            and self.start == other.start
            and self.interval == other.interval
            and np.array_equal(self.values, other.values, equal_nan=True)
        )
