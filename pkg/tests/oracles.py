"""Slow, obvious reference implementations the package is checked against.

Nothing here imports from ``pvwpe`` except where a container type is
needed to hand results back; the arithmetic is written out longhand.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath


def ranks(vector):
    """1-based ranks by (value, index): ties go to the earlier element."""
    order = sorted(range(len(vector)), key=lambda i: (vector[i], i))
    out = [0] * len(vector)
    for r, i in enumerate(order, start=1):
        out[i] = r
    return tuple(out)


def population_variance(vector):
    if min(vector) == max(vector):
        return 0.0
    m = math.fsum(vector) / len(vector)
    return math.fsum((v - m) ** 2 for v in vector) / len(vector)


def naive_distribution(window, d, tau):
    """Pattern -> accumulated weight, patterns keyed by rank tuple."""
    table = {p: 0.0 for p in itertools.permutations(range(1, d + 1))}
    n_vec = len(window) - (d - 1) * tau
    for t in range(n_vec):
        vec = [window[t + k * tau] for k in range(d)]
        table[ranks(vec)] += population_variance(vec)
    return table


def naive_wpe(window, d, tau):
    """Normalised WPE, or None when every vector is flat."""
    table = naive_distribution(window, d, tau)
    total = math.fsum(table.values())
    if total == 0:
        return None
    h = 0.0
    for w in table.values():
        if w > 0:
            p = w / total
            h -= p * math.log2(p)
    return h / math.log2(math.factorial(d))


def exact_distribution(window, d, tau):
    """Same as :func:`naive_distribution` but in rationals."""
    window = [Fraction(x) for x in window]
    table = {}
    for t in range(len(window) - (d - 1) * tau):
        vec = [window[t + k * tau] for k in range(d)]
        m = sum(vec) / d
        w = sum((v - m) ** 2 for v in vec) / d
        key = ranks(vec)
        table[key] = table.get(key, Fraction(0)) + w
    total = sum(table.values())
    return {k: w / total for k, w in table.items()}, total


def exact_wpe(window, d, tau, dps=40):
    """(normalised, raw bits) evaluated with mpmath at ``dps`` digits."""
    probs, _ = exact_distribution(window, d, tau)
    with mpmath.workdps(dps):
        raw = -mpmath.fsum(mpmath.mpf(p.numerator) / p.denominator
                           * mpmath.log(mpmath.mpf(p.numerator) / p.denominator, 2)
                           for p in probs.values() if p > 0)
        norm = raw / mpmath.log(math.factorial(d), 2)
        return norm, raw


def lehmer(rank_tuple):
    """Rank of a permutation in lexicographic order, by enumeration."""
    d = len(rank_tuple)
    for i, p in enumerate(itertools.permutations(range(1, d + 1))):
        if p == tuple(rank_tuple):
            return i
    raise ValueError(rank_tuple)


def locf(values, leading=0.0):
    out, last = [], None
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            out.append(leading if last is None else last)
        else:
            out.append(v)
            last = v
    return out


def pearson(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    sab = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    saa = math.fsum((x - ma) ** 2 for x in a)
    sbb = math.fsum((y - mb) ** 2 for y in b)
    return sab / math.sqrt(saa * sbb)


def quantile7(values, q):
    """Linear interpolation between order statistics (R type 7)."""
    v = sorted(values)
    h = (len(v) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def point_mean(rows):
    """Per-column mean skipping NaN; NaN where a column has no values."""
    out = []
    for col in zip(*rows):
        vals = [v for v in col if not math.isnan(v)]
        out.append(math.fsum(vals) / len(vals) if vals else math.nan)
    return out
