"""Clipping and Gaussian-mechanism calibration shared by both estimators.

All logarithms in the threshold and noise formulas are natural.  Noise
scales follow the algorithm boxes verbatim: variance 4 * Delta^2 *
ln(2/delta) / eps^2 with Delta the l2 sensitivity bound of the released
statistic (this constant differs from the classical sqrt(2 ln(1.25/delta))
calibration; the boxes are authoritative here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CONCENTRATION = 3.0  # exponent c in the clipping threshold


@dataclass(frozen=True)
class ClipThresholdParams:
    """Inputs of the per-level clipping threshold.

    ``c`` is the concentration exponent (clipping is inactive with
    probability >= 1 - N^-c), ``N`` the total individual count across
    servers, ``psi_sup`` the sup norm of the mother wavelet.
    """

    c: float
    N: int
    psi_sup: float
    alpha: float
    R: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("concentration exponent c must be positive")
        if self.N < 2:
            raise ValueError("total individual count N must be >= 2")


def clip(v, tau):
    """Clamp to [-tau, tau]; elementwise on arrays."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("clipping threshold must be nonnegative")
    return np.clip(v, -tau, tau)


def tau_independent(level: int, m_s: int, params: ClipThresholdParams) -> float:
    """Clipping threshold for the level-``level`` projection statistics.

    2 (2c ln N)^{3/2} (1/sqrt(m) + psi_sup 2^{l/2} / (3m)) + R 2^{-l(a+1/2)}
    """
    if level < 0 or m_s < 1:
        raise ValueError("need level >= 0 and m_s >= 1")
    lead = 2.0 * (2.0 * params.c * math.log(params.N)) ** 1.5
    spread = 1.0 / math.sqrt(m_s) + params.psi_sup * 2.0 ** (level / 2.0) / (3.0 * m_s)
    return lead * spread + params.R * 2.0 ** (-level * (params.alpha + 0.5))


def tau_common(N: int, c_alpha_r: float) -> float:
    """Observation clipping threshold sqrt(2 ln N) + C for the common design."""
    if N < 2:
        raise ValueError("total individual count N must be >= 2")
    if c_alpha_r < 0:
        raise ValueError("sup-norm bound must be nonnegative")
    return math.sqrt(2.0 * math.log(N)) + c_alpha_r


def sup_norm_bound(psi_sup: float, alpha: float, R: float, L_star: int = 15) -> float:
    """Upper bound on the sup norm of curves from the simulation generator.

    Sums the per-level worst case R 2^{-l(alpha+1/2)} 2^{l/2} psi_sup over
    the generated levels; used as the C term of the common-design
    threshold.
    """
    levels = np.arange(L_star + 1)
    return float(R * psi_sup * np.sum(2.0 ** (-levels * alpha)))


def _check_privacy_params(eps: float, delta: float) -> None:
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    if math.isfinite(eps) and not 0 < delta < 1:
        raise ValueError(
            f"the Gaussian mechanism needs delta in (0, 1) for finite epsilon, got {delta}")


def sigma_independent(L: int, level: int, m_s: int, tau_l: float, n_s: int,
                      eps: float, delta: float, c_overlap: int) -> float:
    """Noise sd for one privatized projection coefficient at ``level``.

    sqrt(4 c_A^2 L (2^l ^ m) tau_l^2 ln(2/delta)) / (n eps); 0 when eps is
    infinite.
    """
    _check_privacy_params(eps, delta)
    if not math.isfinite(eps):
        return 0.0
    var = (4.0 * c_overlap**2 * L * min(2**level, m_s) * tau_l**2
           * math.log(2.0 / delta)) / (n_s**2 * eps**2)
    return math.sqrt(var)


def sigma_common(tau: float, m: int, n_s: int, eps: float, delta: float) -> float:
    """Noise sd for one privatized design-point mean.

    sqrt(4 tau^2 m ln(2/delta)) / (n eps); 0 when eps is infinite.
    """
    _check_privacy_params(eps, delta)
    if not math.isfinite(eps):
        return 0.0
    return math.sqrt(4.0 * tau**2 * m * math.log(2.0 / delta)) / (n_s * eps)


def sensitivity_bound_independent(L: int, n_s: int, c_overlap: int) -> float:
    """l2 sensitivity bound c_A sqrt(L) / n for the rescaled statistic vector."""
    return c_overlap * math.sqrt(L) / n_s


def audit_sensitivity(stat_fn, dataset, resample, trials: int,
                      rng: np.random.Generator) -> float:
    """Empirical l2 sensitivity of a per-server statistic.

    ``stat_fn`` maps a dataset to the pre-noise statistic vector;
    ``resample(dataset, i, rng)`` returns a neighboring dataset with
    individual ``i`` replaced.  Returns the largest l2 distance observed
    over ``trials`` random single-record replacements.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    base = np.asarray(stat_fn(dataset), dtype=float)
    n = dataset.config.n
    worst = 0.0
    for _ in range(trials):
        i = int(rng.integers(n))
        other = np.asarray(stat_fn(resample(dataset, i, rng)), dtype=float)
        worst = max(worst, float(np.linalg.norm(other - base)))
    return worst


def truncated_gaussian_bias_bound(mu: float, tau: float) -> float:
    """Bound 4|mu| exp(-(tau-|mu|)^2 / 2) on |E clip(W, tau) - mu|, W ~ N(mu, 1)."""
    if tau <= abs(mu):
        raise ValueError("bound requires tau > |mu|")
    return 4.0 * abs(mu) * math.exp(-0.5 * (tau - abs(mu)) ** 2)
