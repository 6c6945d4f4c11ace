"""Step-stress cumulative-exposure model with exponential competing risks.

A simple step-stress life test runs all units at stress ``x1`` until time
``tau1``, then at ``x2`` until the termination time ``tau2``.  Failures are
only counted at pre-fixed inspection times, separately for each of ``R``
independent competing risks, so a test with ``L`` inspection intervals is a
multinomial experiment with ``L*R + 1`` cells (the last cell collects the
survivors).  Each marginal lifetime is exponential with a log-linear
stress-to-scale link, and the two stress phases are glued together with the
cumulative-exposure time shift that keeps every CDF continuous at ``tau1``.

This module holds the parametrization, the cell probabilities, and their
analytic derivatives; everything downstream (estimation, intervals,
diagnostics, simulation) is built on these functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DesignError, DomainError

__all__ = [
    "StepStressDesign",
    "ModelParams",
    "CellProbabilities",
    "DerivativeMatrix",
    "shifting_time",
    "relative_risk",
    "cell_probabilities",
    "derivative_matrix",
    "lifetime_cdf",
]


@dataclass(frozen=True)
class StepStressDesign:
    """Test plan for a simple step-stress experiment with interval monitoring.

    Parameters
    ----------
    x1, x2 : float
        Stress levels before and after the stress-change time.
    tau1 : float
        Time of the stress change; must be one of the inspection times.
    tau2 : float
        Termination time; must equal the last inspection time.
    inspection_times : sequence of float
        Strictly increasing positive times at which failure counts are read.
    num_risks : int
        Number of independent competing risks ``R >= 1``.
    x0 : float, optional
        Normal-operating stress used for extrapolated lifetime
        characteristics.  Defaults to ``x1`` (partially accelerated plan).
    """

    x1: float
    x2: float
    tau1: float
    tau2: float
    inspection_times: tuple[float, ...]
    num_risks: int = 1
    x0: float | None = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.inspection_times)
        object.__setattr__(self, "inspection_times", times)
        object.__setattr__(self, "x1", float(self.x1))
        object.__setattr__(self, "x2", float(self.x2))
        object.__setattr__(self, "tau1", float(self.tau1))
        object.__setattr__(self, "tau2", float(self.tau2))
        object.__setattr__(self, "num_risks", int(self.num_risks))
        if self.x0 is None:
            object.__setattr__(self, "x0", self.x1)
        else:
            object.__setattr__(self, "x0", float(self.x0))

        if self.num_risks < 1:
            raise DesignError("num_risks must be at least 1")
        if self.x1 == self.x2:
            raise DesignError("stress levels x1 and x2 must differ")
        if not (0.0 < self.tau1 < self.tau2):
            raise DesignError("need 0 < tau1 < tau2")
        arr = np.asarray(times)
        if arr.size == 0 or np.any(arr <= 0.0) or np.any(np.diff(arr) <= 0.0):
            raise DesignError("inspection times must be positive and strictly increasing")
        if arr[-1] != self.tau2:
            raise DesignError("the last inspection time must equal tau2")
        if not np.any(np.isclose(arr, self.tau1, rtol=1e-12, atol=0.0)):
            raise DesignError("tau1 must be one of the inspection times")

    @property
    def num_intervals(self) -> int:
        return len(self.inspection_times)

    @property
    def num_cells(self) -> int:
        """Multinomial cells: one per (interval, risk) plus one for survivors."""
        return self.num_intervals * self.num_risks + 1

    def stress_level_of_interval(self, interval: int) -> int:
        """0-based stress level (0 or 1) active on the 0-based interval."""
        return int(self._arrays.level[interval])

    def cell_index(self, interval: int, risk: int) -> int:
        """Flat cell index for 0-based (interval, risk); the last cell is survival."""
        L, R = self.num_intervals, self.num_risks
        if not (0 <= interval < L and 0 <= risk < R):
            raise IndexError("interval or risk out of range")
        return interval * R + risk

    @cached_property
    def _arrays(self) -> "_DesignArrays":
        return _DesignArrays(self)


class _DesignArrays:
    """Precomputed constants used by the vectorized model kernels."""

    __slots__ = (
        "it", "edges", "level", "x_levels", "x_int", "t_lo", "t_hi",
        "tau1", "tau2", "x0", "L", "R", "n_cells", "dx",
    )

    def __init__(self, design: StepStressDesign):
        self.it = np.asarray(design.inspection_times, dtype=float)
        self.edges = np.concatenate(([0.0], self.it))
        # interval (IT_{l-1}, IT_l] runs at the first stress iff IT_l <= tau1
        self.level = (self.it > design.tau1).astype(np.intp)
        self.x_levels = np.array([design.x1, design.x2], dtype=float)
        self.x_int = self.x_levels[self.level]
        self.t_lo = self.edges[:-1]
        self.t_hi = self.it
        self.tau1 = design.tau1
        self.tau2 = design.tau2
        self.x0 = design.x0
        self.L = self.it.size
        self.R = design.num_risks
        self.n_cells = self.L * self.R + 1
        self.dx = design.x2 - design.x1


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Log-linear regression coefficients, one ``(a_0j, a_1j)`` pair per risk.

    The exponential scale of risk ``j`` at stress ``x`` is
    ``theta_j(x) = exp(a_0j + a_1j * x)``; the parameter vector is stored
    interleaved as ``(a_01, a_11, a_02, a_12, ...)``.
    """

    a: np.ndarray

    def __post_init__(self):
        arr = np.array(self.a, dtype=float, copy=True).ravel()
        if arr.size == 0 or arr.size % 2 != 0:
            raise ValueError("parameter vector must have an even, positive length")
        if not np.all(np.isfinite(arr)):
            raise ValueError("parameters must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "a", arr)

    @classmethod
    def from_pairs(cls, pairs) -> "ModelParams":
        """Build from ``[(a_01, a_11), (a_02, a_12), ...]``."""
        return cls(np.concatenate([np.asarray(p, dtype=float) for p in pairs]))

    @property
    def num_risks(self) -> int:
        return self.a.size // 2

    @property
    def intercepts(self) -> np.ndarray:
        return self.a[0::2]

    @property
    def slopes(self) -> np.ndarray:
        return self.a[1::2]

    def theta(self, x: float) -> np.ndarray:
        """Per-risk exponential scales at stress ``x``."""
        return np.exp(self.intercepts + self.slopes * x)

    def __repr__(self) -> str:  # compact, the default ndarray repr is noisy
        pairs = ", ".join(
            f"({a0:.6g}, {a1:.6g})" for a0, a1 in zip(self.intercepts, self.slopes)
        )
        return f"ModelParams([{pairs}])"


@dataclass(frozen=True)
class CellProbabilities:
    """Multinomial probability vector in cell order.

    ``p`` stacks ``p_lj`` row by row (interval outer, risk inner) and ends
    with the survival probability ``p_0``.
    """

    p: np.ndarray
    num_risks: int

    @property
    def survival(self) -> float:
        return float(self.p[-1])

    @property
    def failure_matrix(self) -> np.ndarray:
        """View of the failure cells as an ``(L, R)`` matrix."""
        return self.p[:-1].reshape(-1, self.num_risks)


@dataclass(frozen=True)
class DerivativeMatrix:
    """Jacobian ``W`` of the cell probabilities with respect to the parameters.

    Rows follow the cell order of :class:`CellProbabilities`; columns come in
    blocks ``(d/d a_0k, d/d a_1k)`` per risk ``k``.
    """

    W: np.ndarray


# ---------------------------------------------------------------------------
# vectorized kernels (also used by the estimation hot loop)
# ---------------------------------------------------------------------------

def _inv_theta(a: np.ndarray, dz: _DesignArrays) -> np.ndarray:
    """``1/theta_ij`` as a (2, R) array over stress levels and risks."""
    a0, a1 = a[0::2], a[1::2]
    return np.exp(-(a0[None, :] + np.outer(dz.x_levels, a1)))


def _log_survival_at(edges: np.ndarray, lam: np.ndarray, tau1: float) -> np.ndarray:
    """Cumulative-exposure log-survival of the minimum lifetime at ``edges``."""
    return -np.where(edges <= tau1, edges * lam[0], tau1 * lam[0] + (edges - tau1) * lam[1])


def _cell_prob_vector(a: np.ndarray, dz: _DesignArrays) -> np.ndarray:
    invth = _inv_theta(a, dz)
    lam = invth.sum(axis=1)
    log_s = _log_survival_at(dz.edges, lam, dz.tau1)
    s = np.exp(log_s)
    # S(IT_{l-1}) - S(IT_l), computed via expm1 to keep tiny masses accurate
    d_s = s[:-1] * (-np.expm1(log_s[1:] - log_s[:-1]))
    pi = invth / lam[:, None]
    cells = pi[dz.level] * d_s[:, None]
    out = np.empty(dz.n_cells)
    out[:-1] = cells.ravel()
    out[-1] = s[-1]
    return out


def _shift_terms(a: np.ndarray, dz: _DesignArrays) -> tuple[np.ndarray, np.ndarray]:
    """Second-phase time shifts ``h_j`` and their slope derivatives ``h*_j``."""
    a1 = a[1::2]
    ratio = np.exp(a1 * dz.dx)  # theta_2j / theta_1j
    h2 = dz.tau1 * (ratio - 1.0)
    hstar2 = dz.tau1 * ratio * dz.dx
    return h2, hstar2


def _derivative_matrix(a: np.ndarray, dz: _DesignArrays) -> np.ndarray:
    invth = _inv_theta(a, dz)
    lam = invth.sum(axis=1)
    log_s = _log_survival_at(dz.edges, lam, dz.tau1)
    s = np.exp(log_s)
    pi = invth / lam[:, None]

    h2, hstar2 = _shift_terms(a, dz)
    lev = dz.level
    on2 = lev[:, None].astype(float)  # 1.0 on second-phase intervals
    H = on2 * h2[None, :]
    HS = on2 * hstar2[None, :]
    x_i = dz.x_int
    invth_int = invth[lev]
    pi_int = pi[lev]
    s_lo, s_hi = s[:-1], s[1:]

    # gradients of pi_ij * S(t) at both interval endpoints, per column block k
    g0_lo = pi_int + (dz.t_lo[:, None] + H) * invth_int
    g0_hi = pi_int + (dz.t_hi[:, None] + H) * invth_int
    g1_lo = pi_int * x_i[:, None] + (-HS + (dz.t_lo[:, None] + H) * x_i[:, None]) * invth_int
    g1_hi = pi_int * x_i[:, None] + (-HS + (dz.t_hi[:, None] + H) * x_i[:, None]) * invth_int

    a0_blk = s_lo[:, None] * g0_lo - s_hi[:, None] * g0_hi  # (L, k)
    a1_blk = s_lo[:, None] * g1_lo - s_hi[:, None] * g1_hi
    d_s = s_lo - s_hi

    w0 = pi_int[:, :, None] * a0_blk[:, None, :]  # (L, j, k)
    w1 = pi_int[:, :, None] * a1_blk[:, None, :]
    rr = np.arange(dz.R)
    w0[:, rr, rr] -= pi_int * d_s[:, None]
    w1[:, rr, rr] -= pi_int * d_s[:, None] * x_i[:, None]

    W = np.empty((dz.n_cells, 2 * dz.R))
    W[:-1, 0::2] = w0.reshape(dz.L * dz.R, dz.R)
    W[:-1, 1::2] = w1.reshape(dz.L * dz.R, dz.R)
    p0 = s[-1]
    W[-1, 0::2] = p0 * (dz.tau2 + h2) * invth[1]
    W[-1, 1::2] = p0 * (-hstar2 + (dz.tau2 + h2) * dz.x_levels[1]) * invth[1]
    return W


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _check_indices(design: StepStressDesign, risk: int, level: int):
    if not 1 <= risk <= design.num_risks:
        raise IndexError(f"risk must be in 1..{design.num_risks}")
    if level not in (1, 2):
        raise IndexError("stress level must be 1 or 2")


def shifting_time(params: ModelParams, design: StepStressDesign, risk: int, level: int) -> float:
    """Cumulative-exposure time shift ``h_j`` for 1-based ``risk`` and ``level``.

    The first phase needs no shift; the second phase is shifted by
    ``tau1 * (theta_2j / theta_1j - 1)`` so both CDF pieces agree at ``tau1``.
    """
    _check_indices(design, risk, level)
    if level == 1:
        return 0.0
    slope = params.slopes[risk - 1]
    return design.tau1 * np.expm1(slope * (design.x2 - design.x1))


def relative_risk(params: ModelParams, design: StepStressDesign, level: int, risk: int) -> float:
    """Conditional probability that a failure at stress ``level`` is due to ``risk``.

    Equals the hazard share ``theta_ij^-1 / sum_k theta_ik^-1``; over risks it
    sums to one at each level.
    """
    _check_indices(design, risk, level)
    invth = _inv_theta(params.a, design._arrays)
    row = invth[level - 1]
    return float(row[risk - 1] / row.sum())


def cell_probabilities(params: ModelParams, design: StepStressDesign) -> CellProbabilities:
    """Multinomial cell probabilities of the interval-monitored experiment.

    Each failure cell is the relative risk at the interval's stress level
    times the drop of the minimum-lifetime survival function across the
    interval; the last cell is survival past ``tau2``.
    """
    _check_params_match(params, design)
    p = _cell_prob_vector(params.a, design._arrays)
    return CellProbabilities(p=p, num_risks=design.num_risks)


def derivative_matrix(params: ModelParams, design: StepStressDesign) -> DerivativeMatrix:
    """Analytic Jacobian of :func:`cell_probabilities` wrt the parameters."""
    _check_params_match(params, design)
    return DerivativeMatrix(W=_derivative_matrix(params.a, design._arrays))


def lifetime_cdf(params: ModelParams, design: StepStressDesign, t, risk: int | None = None):
    """CDF of the step-stress lifetime at time(s) ``t``.

    With ``risk`` given (1-based) returns the marginal CDF of that risk's
    latent lifetime; otherwise the CDF of the observed minimum over risks.
    Both are continuous at ``tau1`` by construction.
    """
    _check_params_match(params, design)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("lifetime CDF is defined for t >= 0")
    dz = design._arrays
    invth = _inv_theta(params.a, dz)
    if risk is not None:
        _check_indices(design, risk, 1)
        rates = invth[:, risk - 1 : risk]
    else:
        rates = invth
    lam = rates.sum(axis=1)
    log_s = _log_survival_at(t_arr, lam, dz.tau1)
    out = -np.expm1(log_s)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def _check_params_match(params: ModelParams, design: StepStressDesign):
    if params.num_risks != design.num_risks:
        raise DesignError(
            f"parameter vector encodes {params.num_risks} risks, design has {design.num_risks}"
        )
