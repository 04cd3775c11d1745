"""Paired rank statistics: Wilcoxon signed-rank test and Cliff's delta."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import AllDifferencesZero, EmptySample, TooFewPairs

MIN_PAIRS = 5
EXACT_MAX_N = 25


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n: int
    method: str


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for idx in order[i : j + 1]:
            ranks[idx] = mid
        i = j + 1
    return ranks


def _exact_cdf(ranks: Sequence[float], w: float) -> float:
    """P(W+ <= w) under H0, by subset-sum counting on doubled ranks."""
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    limit = int(math.floor(2 * w + 1e-9))
    return sum(counts[: limit + 1]) / 2 ** len(ranks)


def wilcoxon_signed_rank(ranks_a: Sequence[float], ranks_b: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes get mid-ranks. For
    n <= 25 the p-value comes from the exact null distribution of W+; above
    that a normal approximation with tie-corrected variance and continuity
    correction is used. The statistic is min(W+, W-).
    """
    if len(ranks_a) != len(ranks_b):
        raise ValueError("paired samples must have equal length")
    diffs = [float(a) - float(b) for a, b in zip(ranks_a, ranks_b)]
    diffs = [d for d in diffs if d != 0.0]
    n = len(diffs)
    if n == 0:
        raise AllDifferencesZero("AllDifferencesZero: every paired difference is zero")
    if n < MIN_PAIRS:
        raise TooFewPairs(f"TooFewPairs: {n} non-zero differences, need >= {MIN_PAIRS}")
    ranks = _midranks([abs(d) for d in diffs])
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    statistic = min(w_plus, w_minus)

    if n <= EXACT_MAX_N:
        p = 2.0 * _exact_cdf(ranks, statistic)
        return WilcoxonResult(statistic, min(1.0, p), n, "exact")

    mean = n * (n + 1) / 4.0
    ties: dict[float, int] = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24.0 - sum(t**3 - t for t in ties.values()) / 48.0
    diff = w_plus - mean
    z = (diff - math.copysign(0.5, diff) if diff else 0.0) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return WilcoxonResult(statistic, min(1.0, p), n, "normal")


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    if not a or not b:
        raise EmptySample("EmptySample: Cliff's delta needs two non-empty samples")
    greater = sum(1 for x in a for y in b if x > y)
    less = sum(1 for x in a for y in b if x < y)
    return (greater - less) / (len(a) * len(b))


def cliffs_magnitude(delta: float) -> str:
    d = abs(delta)
    if d < 0.147:
        return "negligible"
    if d < 0.33:
        return "small"
    if d < 0.474:
        return "medium"
    return "large"
