"""Lifetime characteristics at normal operating stress with delta-method intervals.

Under constant stress ``x0`` the observed lifetime is exponential with rate
``sum_j exp(-a_0j - a_1j x0)``, so the mean time to failure, reliability at a
mission time and distribution quantiles all have closed forms.  Standard
errors follow from the delta method applied to the fitted parameter
covariance; confidence intervals come in a domain-truncated direct form and
a log/logit-transformed form whose endpoints respect the natural domain.
Cause-specific versions use the marginal exponential of a single risk and
the corresponding 2x2 covariance block.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DomainError
from .estimation import FitResult
from .model import ModelParams, StepStressDesign

__all__ = [
    "CharacteristicEstimate",
    "mttf",
    "reliability",
    "quantile",
    "transformed_ci",
    "cause_specific_mttf",
    "cause_specific_reliability",
    "cause_specific_quantile",
    "mttf_value",
    "reliability_value",
    "quantile_value",
    "cause_specific_mttf_value",
    "cause_specific_reliability_value",
    "cause_specific_quantile_value",
]


@dataclass(frozen=True)
class CharacteristicEstimate:
    """Point estimate of a lifetime characteristic with its interval pair.

    ``std_error`` is the asymptotic sigma of the sqrt(N)-normalized
    estimator; the direct interval is ``value +/- z * std_error / sqrt(N)``
    truncated to the characteristic's natural domain.  ``ci_bootstrap`` is
    filled by callers that also run the bootstrap.
    """

    kind: str  # "mttf" | "reliability" | "quantile"
    risk: int | None  # None for the overall lifetime, else 0-based risk index
    value: float
    std_error: float
    ci_direct: tuple[float, float]
    ci_transformed: tuple[float, float]
    level: float
    n_units: int
    mission_time: float | None = None
    quantile_level: float | None = None
    ci_bootstrap: tuple[float, float] | None = None
    transform_degenerate: bool = False


def _zq(level: float) -> float:
    if not 0.0 <= level < 1.0:
        raise DomainError("confidence level must be in [0, 1)")
    return float(norm.ppf(0.5 + level / 2.0))


def _operating_rates(params: ModelParams, design: StepStressDesign) -> np.ndarray:
    """Per-risk failure rates ``exp(-a_0j - a_1j x0)`` at the operating stress."""
    return np.exp(-(params.intercepts + params.slopes * design.x0))


# ---------------------------------------------------------------------------
# plain value functions (no covariance needed; used by bootstrap & simulation)
# ---------------------------------------------------------------------------

def mttf_value(params: ModelParams, design: StepStressDesign) -> float:
    """Mean time to failure ``1 / sum_j exp(-a_0j - a_1j x0)``."""
    return float(1.0 / _operating_rates(params, design).sum())


def reliability_value(params: ModelParams, design: StepStressDesign, t0: float) -> float:
    if t0 < 0.0:
        raise DomainError("mission time must be nonnegative")
    return float(np.exp(-t0 * _operating_rates(params, design).sum()))


def quantile_value(params: ModelParams, design: StepStressDesign, alpha0: float) -> float:
    if not 0.0 < alpha0 < 1.0:
        raise DomainError("quantile level must be in (0, 1)")
    return float(-np.log1p(-alpha0) / _operating_rates(params, design).sum())


def cause_specific_mttf_value(params: ModelParams, design: StepStressDesign, risk: int) -> float:
    return float(1.0 / _operating_rates(params, design)[risk])


def cause_specific_reliability_value(
    params: ModelParams, design: StepStressDesign, risk: int, t0: float
) -> float:
    if t0 < 0.0:
        raise DomainError("mission time must be nonnegative")
    return float(np.exp(-t0 * _operating_rates(params, design)[risk]))


def cause_specific_quantile_value(
    params: ModelParams, design: StepStressDesign, risk: int, alpha0: float
) -> float:
    if not 0.0 < alpha0 < 1.0:
        raise DomainError("quantile level must be in (0, 1)")
    return float(-np.log1p(-alpha0) / _operating_rates(params, design)[risk])


# ---------------------------------------------------------------------------
# interval machinery
# ---------------------------------------------------------------------------

def _direct_interval(value, sigma, n_units, level, domain):
    z = _zq(level)
    half = z * sigma / np.sqrt(n_units)
    lo, hi = value - half, value + half
    lo = max(lo, domain[0])
    hi = min(hi, domain[1])
    return (float(lo), float(hi))


def _log_interval(value, sigma, n_units, level):
    """Transformed interval for a positive characteristic (log scale)."""
    z = _zq(level)
    s = np.exp(z * sigma / (np.sqrt(n_units) * value))
    return (float(value / s), float(value * s))


def _logit_interval(value, sigma, n_units, level):
    """Transformed interval for a probability (logit scale)."""
    z = _zq(level)
    s = np.exp(z * sigma / (np.sqrt(n_units) * value * (1.0 - value)))
    lo = value / (value + (1.0 - value) * s)
    hi = value / (value + (1.0 - value) / s)
    return (float(lo), float(hi))


def _assemble(kind, risk, value, grad, fit: FitResult, level, t0=None, alpha0=None):
    if fit.covariance is None:
        raise DomainError("fit result carries no covariance; refit with compute_covariance=True")
    var = float(grad @ fit.covariance @ grad)
    sigma = float(np.sqrt(max(var, 0.0)))
    n = fit.n_units
    degenerate = False
    if kind == "reliability":
        direct = _direct_interval(value, sigma, n, level, (0.0, 1.0))
        if value <= 0.0 or value >= 1.0:
            warnings.warn(
                "reliability estimate is degenerate for the logit transform; "
                "falling back to the truncated direct interval",
                RuntimeWarning,
            )
            transformed, degenerate = direct, True
        else:
            transformed = _logit_interval(value, sigma, n, level)
    else:
        direct = _direct_interval(value, sigma, n, level, (0.0, np.inf))
        if value <= 0.0:
            warnings.warn(
                "nonpositive estimate is degenerate for the log transform; "
                "falling back to the truncated direct interval",
                RuntimeWarning,
            )
            transformed, degenerate = direct, True
        else:
            transformed = _log_interval(value, sigma, n, level)
    return CharacteristicEstimate(
        kind=kind,
        risk=risk,
        value=float(value),
        std_error=sigma,
        ci_direct=direct,
        ci_transformed=transformed,
        level=level,
        n_units=n,
        mission_time=t0,
        quantile_level=alpha0,
        transform_degenerate=degenerate,
    )


def transformed_ci(est: CharacteristicEstimate, level: float | None = None) -> tuple[float, float]:
    """Recompute the log/logit-transformed interval, optionally at a new level."""
    level = est.level if level is None else level
    if est.kind == "reliability":
        if est.value <= 0.0 or est.value >= 1.0:
            warnings.warn(
                "degenerate reliability for the logit transform; returning the direct interval",
                RuntimeWarning,
            )
            return est.ci_direct
        return _logit_interval(est.value, est.std_error, est.n_units, level)
    if est.value <= 0.0:
        warnings.warn(
            "degenerate value for the log transform; returning the direct interval",
            RuntimeWarning,
        )
        return est.ci_direct
    return _log_interval(est.value, est.std_error, est.n_units, level)


# ---------------------------------------------------------------------------
# overall characteristics
# ---------------------------------------------------------------------------

def mttf(fit: FitResult, level: float = 0.95) -> CharacteristicEstimate:
    """MTTF at the operating stress with delta-method standard error.

    The gradient has per-risk blocks ``pi_0k * E * (1, x0)`` where ``pi_0k``
    is the hazard share of risk ``k`` at the operating stress.
    """
    params, design = fit.params_hat, fit.design
    rates = _operating_rates(params, design)
    value = 1.0 / rates.sum()
    pi0 = rates / rates.sum()
    grad = np.empty(params.a.size)
    grad[0::2] = pi0 * value
    grad[1::2] = pi0 * value * design.x0
    return _assemble("mttf", None, value, grad, fit, level)


def reliability(fit: FitResult, t0: float, level: float = 0.95) -> CharacteristicEstimate:
    """Reliability at mission time ``t0`` under the operating stress."""
    params, design = fit.params_hat, fit.design
    rates = _operating_rates(params, design)
    value = float(np.exp(-t0 * rates.sum()))
    grad = np.empty(params.a.size)
    grad[0::2] = value * t0 * rates
    grad[1::2] = value * t0 * rates * design.x0
    return _assemble("reliability", None, value, grad, fit, level, t0=t0)


def quantile(fit: FitResult, alpha0: float, level: float = 0.95) -> CharacteristicEstimate:
    """Lower ``alpha0`` quantile; proportional to the MTTF by ``-log(1-alpha0)``."""
    params, design = fit.params_hat, fit.design
    factor = -np.log1p(-alpha0)
    rates = _operating_rates(params, design)
    value = factor / rates.sum()
    pi0 = rates / rates.sum()
    grad = np.empty(params.a.size)
    grad[0::2] = factor * pi0 / rates.sum()
    grad[1::2] = factor * pi0 / rates.sum() * design.x0
    return _assemble("quantile", None, value, grad, fit, level, alpha0=alpha0)


# ---------------------------------------------------------------------------
# cause-specific characteristics (2x2 covariance block of the chosen risk)
# ---------------------------------------------------------------------------

def _block_variance(fit: FitResult, risk: int, scale: float, design: StepStressDesign) -> float:
    if fit.covariance is None:
        raise DomainError("fit result carries no covariance; refit with compute_covariance=True")
    sl = slice(2 * risk, 2 * risk + 2)
    block = fit.covariance[sl, sl]
    v = np.array([1.0, design.x0])
    return float(scale * (v @ block @ v))


def cause_specific_mttf(fit: FitResult, risk: int, level: float = 0.95) -> CharacteristicEstimate:
    """Marginal MTTF ``exp(a_0j + a_1j x0)`` of a single (0-based) risk."""
    params, design = fit.params_hat, fit.design
    value = cause_specific_mttf_value(params, design, risk)
    var = _block_variance(fit, risk, value**2, design)
    return _finish_cause_specific("mttf", risk, value, var, fit, level)


def cause_specific_reliability(
    fit: FitResult, risk: int, t0: float, level: float = 0.95
) -> CharacteristicEstimate:
    params, design = fit.params_hat, fit.design
    value = cause_specific_reliability_value(params, design, risk, t0)
    rate = _operating_rates(params, design)[risk]
    var = _block_variance(fit, risk, (value * t0 * rate) ** 2, design)
    return _finish_cause_specific("reliability", risk, value, var, fit, level, t0=t0)


def cause_specific_quantile(
    fit: FitResult, risk: int, alpha0: float, level: float = 0.95
) -> CharacteristicEstimate:
    params, design = fit.params_hat, fit.design
    value = cause_specific_quantile_value(params, design, risk, alpha0)
    ej = cause_specific_mttf_value(params, design, risk)
    var = _block_variance(fit, risk, (np.log1p(-alpha0) * ej) ** 2, design)
    return _finish_cause_specific("quantile", risk, value, var, fit, level, alpha0=alpha0)


def _finish_cause_specific(kind, risk, value, var, fit, level, t0=None, alpha0=None):
    sigma = float(np.sqrt(max(var, 0.0)))
    n = fit.n_units
    degenerate = False
    if kind == "reliability":
        direct = _direct_interval(value, sigma, n, level, (0.0, 1.0))
        if 0.0 < value < 1.0:
            transformed = _logit_interval(value, sigma, n, level)
        else:
            transformed, degenerate = direct, True
    else:
        direct = _direct_interval(value, sigma, n, level, (0.0, np.inf))
        if value > 0.0:
            transformed = _log_interval(value, sigma, n, level)
        else:
            transformed, degenerate = direct, True
    return CharacteristicEstimate(
        kind=kind,
        risk=risk,
        value=float(value),
        std_error=sigma,
        ci_direct=direct,
        ci_transformed=transformed,
        level=level,
        n_units=n,
        mission_time=t0,
        quantile_level=alpha0,
        transform_degenerate=degenerate,
    )
