"""Weighted permutation entropy of a single window of samples.

Each embedding vector ``(x_t, x_{t+tau}, ..., x_{t+(d-1)tau})`` is mapped to
its ordinal pattern and weighted by its population variance. The weighted
pattern frequencies feed a base-2 Shannon entropy that is normalised by
``log2(d!)``.

Patterns are indexed by their Lehmer code, so a distribution is a flat array
of ``d!`` bins. Ties inside a vector are broken by position: the earlier
sample receives the smaller rank.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ContractError",
    "ShortWindowWarning",
    "EmbeddingConfig",
    "OrdinalPattern",
    "WeightedDistribution",
    "WpeValue",
    "ordinal_pattern",
    "pattern_code",
    "pattern_from_code",
    "vector_weight",
    "embedding_codes",
    "embedding_weights",
    "weighted_distribution",
    "entropy_from_histogram",
    "wpe",
]

D_MIN, D_MAX = 3, 7


class ContractError(ValueError):
    """Raised when a caller violates an operation's preconditions."""


class ShortWindowWarning(UserWarning):
    """Window too short for reliable pattern statistics (N <= 5 d!)."""


@dataclass(frozen=True)
class EmbeddingConfig:
    """Embedding dimension ``d`` and time delay ``tau`` (both in samples)."""

    d: int = 6
    tau: int = 3

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not D_MIN <= self.d <= D_MAX:
            raise ContractError(f"embedding dimension must be an integer in [{D_MIN}, {D_MAX}], got {self.d!r}")
        if not isinstance(self.tau, (int, np.integer)) or self.tau < 1:
            raise ContractError(f"time delay must be an integer >= 1, got {self.tau!r}")

    @property
    def span(self) -> int:
        """Number of samples covered by one embedding vector."""
        return (self.d - 1) * self.tau + 1

    @property
    def n_patterns(self) -> int:
        return math.factorial(self.d)

    @property
    def recommended_length(self) -> int:
        """Smallest window length with N > 5 d!."""
        return 5 * self.n_patterns + 1

    def n_vectors(self, n: int) -> int:
        return n - (self.d - 1) * self.tau

    def check_length(self, n: int, *, warn: bool = True) -> None:
        if n < self.span:
            raise ContractError(
                f"window of {n} samples is shorter than one embedding vector "
                f"({self.span} samples for d={self.d}, tau={self.tau})"
            )
        if warn and n <= 5 * self.n_patterns:
            warnings.warn(
                f"window of {n} samples does not satisfy N > 5*d! = {5 * self.n_patterns}",
                ShortWindowWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class OrdinalPattern:
    """Rank of each vector element, 1-based (``{4, 3, 7}`` -> ``(2, 1, 3)``)."""

    ranks: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.ranks) != list(range(1, len(self.ranks) + 1)):
            raise ContractError(f"{self.ranks!r} is not a permutation of 1..{len(self.ranks)}")

    @property
    def code(self) -> int:
        return pattern_code(self)

    def __str__(self):
        return "-".join(str(r) for r in self.ranks)


@dataclass(frozen=True)
class WeightedDistribution:
    probs: np.ndarray
    total_weight: float

    @property
    def defined(self) -> bool:
        return self.total_weight > 0


@dataclass(frozen=True)
class WpeValue:
    """Normalised WPE plus the raw entropy in bits.

    ``normalized`` is NaN when the window carries no weight at all (every
    embedding vector is constant); ``defined`` distinguishes that case.
    """

    normalized: float
    raw_bits: float

    @property
    def defined(self) -> bool:
        return not math.isnan(self.normalized)

    @classmethod
    def undefined(cls) -> "WpeValue":
        return cls(math.nan, math.nan)


def _as_vector(vector: Sequence[float], d: int | None = None) -> np.ndarray:
    x = np.asarray(vector, dtype=float)
    if x.ndim != 1:
        raise ContractError("expected a one-dimensional sequence")
    if d is not None and x.size != d:
        raise ContractError(f"expected a vector of length {d}, got {x.size}")
    if x.size < 2:
        raise ContractError("a vector needs at least 2 elements")
    return x


def ordinal_pattern(vector: Sequence[float], d: int | None = None) -> OrdinalPattern:
    x = _as_vector(vector, d)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=int)
    ranks[order] = np.arange(1, x.size + 1)
    return OrdinalPattern(tuple(int(r) for r in ranks))


def pattern_code(pattern: OrdinalPattern) -> int:
    """Lehmer code of a rank pattern, a dense index in ``[0, d!)``."""
    r = pattern.ranks
    d = len(r)
    code = 0
    for i in range(d):
        smaller_after = sum(1 for j in range(i + 1, d) if r[j] < r[i])
        code = code * (d - i) + smaller_after
    return code


def pattern_from_code(code: int, d: int) -> OrdinalPattern:
    if not 0 <= code < math.factorial(d):
        raise ContractError(f"code {code} out of range for d={d}")
    digits = []
    for base in range(1, d + 1):
        code, digit = divmod(code, base)
        digits.append(digit)
    digits.reverse()
    remaining = list(range(1, d + 1))
    return OrdinalPattern(tuple(remaining.pop(c) for c in digits))


def vector_weight(vector: Sequence[float], d: int | None = None) -> float:
    """Population variance of one embedding vector."""
    x = _as_vector(vector, d)
    # centring on the first element keeps equal values at exactly zero
    y = x - x[0]
    mean = y.sum() / y.size
    return float(np.sum((y - mean) ** 2) / y.size)


def _columns(x: np.ndarray, cfg: EmbeddingConfig) -> list[np.ndarray]:
    m = cfg.n_vectors(x.size)
    return [x[i * cfg.tau: i * cfg.tau + m] for i in range(cfg.d)]


def embedding_codes(x: np.ndarray, cfg: EmbeddingConfig) -> np.ndarray:
    """Lehmer code of every embedding vector of ``x``.

    The Lehmer digit of element ``i`` counts later elements ranked below it,
    which under first-index tie-breaking is the number of strictly smaller
    later values; no sort is needed.
    """
    cols = _columns(x, cfg)
    codes = np.zeros(cols[0].size, dtype=np.int64)
    for i in range(cfg.d):
        digit = np.zeros(cols[0].size, dtype=np.int64)
        for j in range(i + 1, cfg.d):
            digit += cols[j] < cols[i]
        codes *= cfg.d - i
        codes += digit
    return codes


def embedding_weights(x: np.ndarray, cfg: EmbeddingConfig) -> np.ndarray:
    """Population variance of every embedding vector of ``x``."""
    cols = _columns(x, cfg)
    # centring on the first element keeps constant vectors at exactly zero
    shifted = [c - cols[0] for c in cols[1:]]
    mean = np.zeros(cols[0].size)
    for c in shifted:
        mean += c
    mean /= cfg.d
    acc = mean ** 2
    for c in shifted:
        acc += (c - mean) ** 2
    return acc / cfg.d


def _window_array(window: Sequence[float]) -> np.ndarray:
    x = np.asarray(window, dtype=float)
    if x.ndim != 1:
        raise ContractError("window must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise ContractError("window contains non-finite samples")
    return x


def _histogram(codes: np.ndarray, weights: np.ndarray, n_patterns: int) -> np.ndarray:
    return np.bincount(codes, weights=weights, minlength=n_patterns)


def weighted_distribution(window: Sequence[float], cfg: EmbeddingConfig) -> WeightedDistribution:
    x = _window_array(window)
    cfg.check_length(x.size, warn=False)
    hist = _histogram(embedding_codes(x, cfg), embedding_weights(x, cfg), cfg.n_patterns)
    total = float(hist.sum())
    if total > 0:
        probs = hist / total
    else:
        probs = np.zeros(cfg.n_patterns)
    return WeightedDistribution(probs, total)


def entropy_from_histogram(hist: np.ndarray, d: int) -> WpeValue:
    """Normalised entropy of a weighted pattern histogram (Undefined if empty)."""
    total = hist.sum()
    if not total > 0:
        return WpeValue.undefined()
    p = hist[hist > 0] / total
    raw = float(-np.sum(p * np.log2(p))) + 0.0
    norm = raw / math.log2(math.factorial(d))
    return WpeValue(min(norm, 1.0), raw)


def wpe(window: Sequence[float], cfg: EmbeddingConfig, *, warn: bool = True) -> WpeValue:
    """Normalised weighted permutation entropy of ``window``.

    Parameters
    ----------
    window : sequence of float
        Finite samples, at least ``(d - 1) * tau + 1`` of them.
    cfg : EmbeddingConfig
        Embedding dimension and delay.
    warn : bool
        Emit :class:`ShortWindowWarning` when ``len(window) <= 5 d!``.

    Returns
    -------
    WpeValue
        Undefined (NaN) when every embedding vector is constant.
    """
    x = _window_array(window)
    cfg.check_length(x.size, warn=warn)
    hist = _histogram(embedding_codes(x, cfg), embedding_weights(x, cfg), cfg.n_patterns)
    return entropy_from_histogram(hist, cfg.d)
