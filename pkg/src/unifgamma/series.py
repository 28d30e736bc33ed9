"""Partial sums of positive series, doubling-based trend detection and
Euler-Maclaurin summation for very long smooth sums."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

CONVERGENT = "convergent"
DIVERGENT = "divergent"
FINITE = "finite"

DEFAULT_SCHEDULE = tuple(2**j for j in range(10, 18))


@dataclass
class SeriesReport:
    """Partial sums ``S_N`` of a nonnegative series over a doubling schedule.

    ``value`` is the partial sum at ``truncation``; ``trend`` is the
    doubling-rule verdict (never a proof of convergence).
    """

    value: float
    truncation: int
    schedule: list = field(default_factory=list)
    partial_sums: list = field(default_factory=list)
    trend: str = CONVERGENT
    tail_bound: float = math.nan

    @property
    def divergent(self) -> bool:
        return self.trend == DIVERGENT

    @property
    def increments(self) -> list[float]:
        s = self.partial_sums
        return [b - a for a, b in zip(s, s[1:])]


def cumulative_at(terms: np.ndarray, points) -> list[float]:
    """Accurately summed ``sum(terms[:N])`` for each ``N`` in ``points`` (ascending)."""
    out, acc, prev = [], [], 0
    for n in points:
        acc.append(math.fsum(terms[prev:n]))
        prev = n
        out.append(math.fsum(acc))
    return out


def classify(partial_sums, eps: float = 0.1, persist: int = 4) -> str:
    """Divergent when each doubling adds at least ``(1 - eps)`` times the previous
    increment for ``persist`` consecutive doublings (harmonic-like growth)."""
    d = [b - a for a, b in zip(partial_sums, partial_sums[1:])]
    run = 0
    for a, b in zip(d, d[1:]):
        if a > 0 and b >= (1 - eps) * a:
            run += 1
            if run >= persist:
                return DIVERGENT
        else:
            run = 0
    return CONVERGENT


def evaluate_series(term: Callable[[np.ndarray], np.ndarray], truncation: int,
                    schedule=DEFAULT_SCHEDULE, eps: float = 0.1, persist: int = 4,
                    max_terms: int | None = None, tail_bound: float = math.nan) -> SeriesReport:
    """Evaluate ``sum_{k>=1} term(k)`` at ``truncation`` and over ``schedule``.

    ``max_terms`` caps the index range for finitely supported data; when the
    schedule exceeds it the series is reported as ``finite``.
    """
    sched = sorted(set(int(n) for n in schedule))
    top = max([truncation] + sched)
    finite = max_terms is not None and top > max_terms
    if finite:
        top = max_terms
        sched = [n for n in sched if n <= max_terms] or [max_terms]
        truncation = min(truncation, max_terms)
    k = np.arange(1, top + 1, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        t = np.asarray(term(k), dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("series terms must be nonnegative numbers")
    points = sorted(set(sched + [truncation]))
    sums = dict(zip(points, cumulative_at(t, points)))
    ps = [sums[n] for n in sched]
    trend = FINITE if finite else classify(ps, eps, persist)
    return SeriesReport(sums[truncation], truncation, sched, ps, trend, tail_bound)


def _deriv(g, x):
    h = x * 1e-4
    return float((g(np.array([x + h])) - g(np.array([x - h])))[0] / (2 * h))


class SmoothSum:
    """``K -> sum_{k=1}^K g(k)`` for smooth, slowly varying positive ``g``.

    The first ``direct`` terms are summed exactly (and cached); the remainder
    uses the integral in the variable ``log k`` plus the first two
    Euler-Maclaurin corrections, good to about 1e-13 relative for the
    power/log-type summands used here.
    """

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], direct: int = 2**20):
        self.g = g
        self.direct = direct
        self.terms = np.asarray(g(np.arange(1, direct + 1, dtype=float)), dtype=float)
        self.head = math.fsum(self.terms)

    def _g1(self, x: float) -> float:
        return float(self.g(np.array([x]))[0])

    def __call__(self, K: int) -> float:
        K = int(K)
        if K <= self.direct:
            return math.fsum(self.terms[:K])
        a, b = math.log(self.direct), math.log(float(K))
        f = lambda u: self._g1(math.exp(u)) * math.exp(u)
        edges = np.linspace(a, b, 9)
        integral = math.fsum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
                             for lo, hi in zip(edges[:-1], edges[1:]))
        x0, x1 = float(self.direct), float(K)
        corr = (self._g1(x1) - self._g1(x0)) / 2 + (_deriv(self.g, x1) - _deriv(self.g, x0)) / 12
        return self.head + integral + corr


def em_sum(g: Callable[[np.ndarray], np.ndarray], K: int, direct: int = 2**20) -> float:
    """One-off ``sum_{k=1}^K g(k)``; see :class:`SmoothSum`."""
    if int(K) <= direct:
        return math.fsum(np.asarray(g(np.arange(1, int(K) + 1, dtype=float)), dtype=float))
    return SmoothSum(g, direct)(K)


def first_crossing(S: Callable[[int], float], target: float, k_max: int = 10**60) -> int | None:
    """Least integer ``K >= 1`` with ``S(K) >= target`` for nondecreasing ``S``."""
    if S(1) >= target:
        return 1
    lo, hi = 1, 2
    while S(hi) < target:
        lo, hi = hi, hi * 2
        if hi > k_max:
            return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if S(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi
