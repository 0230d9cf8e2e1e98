"""Effective-dimension solvers and closed-form minimax rates.

The common-design dimension solves

    D^{2a} = m^{2a} ^ sum_s min(n_s, n_s^2 eps_s^2 / D),

a strictly increasing left side against a non-increasing right side, so
bisection brackets the unique crossing.  The independent-design dimension
is the largest D with

    D^{2a} <= inf_{1<=d<=D} sum_s min(n m / d, m n^2 e^2 / d^2,
                                      n d^{2a}, n^2 e^2 d^{2a-1}),

where the inner infimum is taken on a geometric grid with local
refinement (the argmin pattern varies across heterogeneous configs, so a
grid is more robust than term-by-term algebra).  Infinite epsilon removes
the privacy terms from every minimum.  Reported risks are D^{-2a} and
carry no polylogarithmic factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .datagen import ServerConfig

INNER_GRID = 512
REFINE_POINTS = 33
REFINE_ROUNDS = 2


class Regime(Enum):
    SAMPLE_LIMITED = "sample"
    MEASUREMENT_LIMITED = "measurement"
    PRIVACY_SAMPLE_LIMITED = "privacy-sample"
    PRIVACY_MEASUREMENT_LIMITED = "privacy-measurement"
    DISCRETIZATION_LIMITED = "discretization"


@dataclass(frozen=True)
class RateSolution:
    d_star: float
    risk: float
    regimes: tuple[Regime, ...]
    residual: float

    def __post_init__(self):
        if self.d_star < 1.0:
            raise ValueError("effective dimension must be >= 1")


@dataclass(frozen=True)
class DeltaConditionReport:
    delta_prime: float
    passed: tuple[bool, ...]
    margins: tuple[float, ...]  # rhs - lhs per server

    @property
    def all_pass(self) -> bool:
        return all(self.passed)


def _common_rhs(D: float, servers, m: int, alpha: float) -> float:
    total = 0.0
    for s in servers:
        if math.isfinite(s.epsilon):
            total += min(s.n, s.n**2 * s.epsilon**2 / D)
        else:
            total += s.n
    return min(float(m) ** (2.0 * alpha), total)


def solve_common(servers, m: int, alpha: float) -> RateSolution:
    """Bisection solution of the common-design dimension equation."""
    if not alpha > 0.5:
        raise ValueError("alpha must exceed 1/2")
    if m < 1:
        raise ValueError("m must be >= 1")
    two_a = 2.0 * alpha

    def gap(D):
        return D**two_a - _common_rhs(D, servers, m, alpha)

    lo, hi = 1.0, max(float(m), sum(s.n for s in servers) ** (1.0 / two_a)) + 1.0
    if gap(lo) >= 0.0:
        d = 1.0
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if gap(mid) < 0.0:
                lo = mid
            else:
                hi = mid
            if abs(gap(mid)) / mid**two_a <= 1e-10:
                lo = mid
                break
        d = lo
    residual = abs(gap(d)) / d**two_a
    regimes = _classify_common(d, servers, m, alpha)
    return RateSolution(d_star=d, risk=d ** (-two_a), regimes=regimes,
                        residual=residual)


def _independent_terms(d, s: ServerConfig, alpha: float):
    """The four candidate information terms on a grid of d values."""
    d = np.asarray(d, dtype=float)
    terms = [s.n * s.m / d, s.n * d ** (2.0 * alpha)]
    if math.isfinite(s.epsilon):
        ne2 = s.n**2 * s.epsilon**2
        terms.append(s.m * ne2 / d**2)
        terms.append(ne2 * d ** (2.0 * alpha - 1.0))
    return terms


def _independent_sum(d, servers, alpha: float):
    d = np.asarray(d, dtype=float)
    total = np.zeros_like(d)
    for s in servers:
        total += np.minimum.reduce(_independent_terms(d, s, alpha))
    return total


def _inner_inf(D: float, servers, alpha: float) -> float:
    """inf over [1, D] of the summed min-terms, grid plus local refinement."""
    if D <= 1.0:
        return float(_independent_sum(np.asarray([1.0]), servers, alpha)[0])
    grid = np.geomspace(1.0, D, INNER_GRID)
    vals = _independent_sum(grid, servers, alpha)
    best = float(vals.min())
    i = int(vals.argmin())
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    for _ in range(REFINE_ROUNDS):
        sub = np.geomspace(lo, hi, REFINE_POINTS)
        sv = _independent_sum(sub, servers, alpha)
        best = min(best, float(sv.min()))
        j = int(sv.argmin())
        lo, hi = sub[max(j - 1, 0)], sub[min(j + 1, len(sub) - 1)]
    return best


def solve_independent(servers, alpha: float) -> RateSolution:
    """Largest D with D^{2a} <= inner infimum, by bisection on the predicate."""
    if not alpha > 0.5:
        raise ValueError("alpha must exceed 1/2")
    two_a = 2.0 * alpha

    def feasible(D):
        return D**two_a <= _inner_inf(D, servers, alpha)

    if not feasible(1.0):
        d = 1.0
    else:
        hi = 2.0
        for _ in range(64):
            if not feasible(hi):
                break
            hi *= 2.0
        else:
            raise RuntimeError("independent-design solver failed to bracket")
        lo = hi / 2.0
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
            if (hi - lo) / lo <= 1e-9:
                break
        d = lo
    residual = abs(d**two_a - _inner_inf(d, servers, alpha)) / d**two_a
    regimes = _classify_independent(d, servers, alpha)
    return RateSolution(d_star=d, risk=d ** (-two_a), regimes=regimes,
                        residual=residual)


# ---------------------------------------------------------------------------
# regime labels


def _classify_common(d: float, servers, m: int, alpha: float) -> tuple[Regime, ...]:
    cap = float(m) ** (2.0 * alpha)
    server_sum = sum(min(s.n, s.n**2 * s.epsilon**2 / d) if math.isfinite(s.epsilon)
                     else s.n for s in servers)
    if cap < server_sum:
        return tuple(Regime.DISCRETIZATION_LIMITED for _ in servers)
    out = []
    for s in servers:
        if not math.isfinite(s.epsilon) or s.n <= s.n**2 * s.epsilon**2 / d:
            out.append(Regime.SAMPLE_LIMITED)
        else:
            out.append(Regime.PRIVACY_SAMPLE_LIMITED)
    return tuple(out)


_INDEPENDENT_ORDER = (
    Regime.MEASUREMENT_LIMITED,          # n m / d
    Regime.PRIVACY_MEASUREMENT_LIMITED,  # m n^2 e^2 / d^2
    Regime.SAMPLE_LIMITED,               # n d^{2a}
    Regime.PRIVACY_SAMPLE_LIMITED,       # n^2 e^2 d^{2a-1}
)


def _classify_independent(d: float, servers, alpha: float) -> tuple[Regime, ...]:
    out = []
    for s in servers:
        ne2 = s.n**2 * s.epsilon**2 if math.isfinite(s.epsilon) else math.inf
        vals = [s.n * s.m / d, s.m * ne2 / d**2,
                s.n * d ** (2.0 * alpha), ne2 * d ** (2.0 * alpha - 1.0)]
        out.append(_INDEPENDENT_ORDER[int(np.argmin(vals))])
    return tuple(out)


def classify_regimes(solution: RateSolution, servers, alpha: float,
                     design: str = "independent", m: int | None = None):
    """Binding-regime label per server at the solved dimension."""
    if design == "common":
        if m is None:
            raise ValueError("common design classification needs m")
        return _classify_common(solution.d_star, servers, m, alpha)
    return _classify_independent(solution.d_star, servers, alpha)


# ---------------------------------------------------------------------------
# homogeneous closed forms


def homogeneous_rate_independent(S: int, n: int, m: int, eps: float,
                                 alpha: float) -> float:
    """(Sn)^-1 + (Smn)^{-2a/(2a+1)} + (Smn^2 e^2)^{-2a/(2a+2)} + (Sn^2 e^2)^-1."""
    two_a = 2.0 * alpha
    rate = 1.0 / (S * n) + (S * m * n) ** (-two_a / (two_a + 1.0))
    if math.isfinite(eps):
        rate += (S * m * n**2 * eps**2) ** (-two_a / (two_a + 2.0))
        rate += 1.0 / (S * n**2 * eps**2)
    return rate


def homogeneous_rate_common(S: int, n: int, m: int, eps: float,
                            alpha: float) -> float:
    """(Sn)^-1 + m^{-2a} + (Sn^2 e^2)^{-2a/(2a+1)}."""
    two_a = 2.0 * alpha
    rate = 1.0 / (S * n) + float(m) ** (-two_a)
    if math.isfinite(eps):
        rate += (S * n**2 * eps**2) ** (-two_a / (two_a + 1.0))
    return rate


def check_delta_condition(servers, kappa: float = 1.0) -> DeltaConditionReport:
    """Per-server check of delta' ln(1/delta') <= kappa (n/m ^ sqrt(n/m)) e^2 / N."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    N = sum(s.n for s in servers)
    finite = [s.delta for s in servers]
    delta_prime = min(finite)
    lhs = 0.0 if delta_prime == 0 else delta_prime * math.log(1.0 / delta_prime)
    passed, margins = [], []
    for s in servers:
        ratio = s.n / s.m
        eps2 = s.epsilon**2 if math.isfinite(s.epsilon) else math.inf
        rhs = kappa * min(ratio, math.sqrt(ratio)) * eps2 / N
        passed.append(lhs <= rhs)
        margins.append(rhs - lhs)
    return DeltaConditionReport(delta_prime=delta_prime, passed=tuple(passed),
                                margins=tuple(margins))
