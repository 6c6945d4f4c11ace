"""Minimum density power divergence estimation for the step-stress model.

The estimator minimizes the density power divergence between the empirical
multinomial vector ``n/N`` and the model cell probabilities.  The tuning
parameter ``beta >= 0`` trades efficiency for robustness; ``beta = 0`` is the
Kullback-Leibler limit and reproduces the maximum likelihood estimator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .errors import DomainError, IllPosedError, SingularInformationError
from .model import (
    ModelParams,
    StepStressDesign,
    _cell_prob_vector,
    _derivative_matrix,
)

__all__ = [
    "CountData",
    "FitOptions",
    "FitResult",
    "dpd_loss",
    "fit",
    "fit_probability_vector",
    "estimating_equation_residual",
    "asymptotic_covariance",
    "param_confidence_interval",
]

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class CountData:
    """Observed failure counts of an interval-monitored step-stress test.

    Parameters
    ----------
    n : ndarray
        ``(L, R)`` matrix of failure counts per (inspection interval, risk).
    n0 : int
        Units surviving past the termination time.
    """

    n: np.ndarray
    n0: int

    def __post_init__(self):
        arr = np.array(self.n, dtype=np.int64, copy=True)
        if arr.ndim != 2:
            raise ValueError("count matrix must be 2-dimensional (intervals x risks)")
        if np.any(arr < 0) or self.n0 < 0:
            raise ValueError("counts must be nonnegative")
        arr.flags.writeable = False
        object.__setattr__(self, "n", arr)
        object.__setattr__(self, "n0", int(self.n0))

    @property
    def n_units(self) -> int:
        """Total number of units N on test."""
        return int(self.n.sum()) + self.n0

    @property
    def num_failures(self) -> int:
        return int(self.n.sum())

    def p_hat(self) -> np.ndarray:
        """Empirical probability vector in cell order (survival last)."""
        N = self.n_units
        out = np.empty(self.n.size + 1)
        out[:-1] = self.n.ravel() / N
        out[-1] = self.n0 / N
        return out

    def is_well_posed(self, design: StepStressDesign) -> bool:
        """At least one failure per risk under each stress level."""
        lev = design._arrays.level
        low = self.n[lev == 0].sum(axis=0)
        high = self.n[lev == 1].sum(axis=0)
        return bool(np.all(low >= 1) and np.all(high >= 1))


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings for :func:`fit`.

    ``gradient_tol`` is relative: the fit is declared converged once the
    2-norm of the loss gradient drops below ``gradient_tol * (1 + |loss|)``.
    """

    gradient_tol: float = 1e-8
    max_iterations: int = 500
    multistart: bool = True
    warm_start: ModelParams | None = None
    polish: bool = True
    simplex_fallback: bool = True
    compute_covariance: bool = True


@dataclass(frozen=True)
class FitResult:
    """Estimate, diagnostics and asymptotic covariance of one fit.

    ``covariance`` is the sandwich matrix of the ``sqrt(N)``-normalized
    estimator, so the standard error of parameter ``i`` is
    ``sqrt(covariance[i, i] / n_units)``.
    """

    params_hat: ModelParams
    beta: float
    loss: float
    covariance: np.ndarray | None
    converged: bool
    gradient_norm: float
    n_units: int
    design: StepStressDesign
    p_hat: np.ndarray
    n_iterations: int = 0
    method: str = ""

    def std_errors(self) -> np.ndarray:
        if self.covariance is None:
            raise SingularInformationError("fit carries no covariance matrix")
        return np.sqrt(np.diag(self.covariance) / self.n_units)


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------

def _loss_value(p_hat: np.ndarray, p: np.ndarray, beta: float) -> float:
    p = np.maximum(p, _TINY)
    if beta == 0.0:
        pos = p_hat > 0.0
        return float(np.sum(p_hat[pos] * (np.log(p_hat[pos]) - np.log(p[pos]))))
    t1 = np.sum(p ** (1.0 + beta))
    t2 = (1.0 + 1.0 / beta) * np.sum(p_hat * p**beta)
    t3 = np.sum(p_hat ** (1.0 + beta)) / beta
    return float(t1 - t2 + t3)


def _loss_and_grad(a: np.ndarray, p_hat: np.ndarray, dz, beta: float, with_info: bool = False):
    p = np.maximum(_cell_prob_vector(a, dz), _TINY)
    W = _derivative_matrix(a, dz)
    weights = p ** (beta - 1.0)
    resid = W.T @ (weights * (p_hat - p))
    grad = -(1.0 + beta) * resid if beta > 0.0 else -resid
    loss = _loss_value(p_hat, p, beta)
    if not with_info:
        return loss, grad
    scale = 1.0 + beta if beta > 0.0 else 1.0
    J = scale * (W.T @ (weights[:, None] * W))
    return loss, grad, J


def dpd_loss(params: ModelParams, data: CountData, design: StepStressDesign, beta: float) -> float:
    """Density power divergence between ``data`` and the model at ``params``.

    At ``beta = 0`` this is the KL divergence (the data-only entropy term is
    included so the ``beta -> 0`` limit is continuous).
    """
    if beta < 0.0:
        raise DomainError("beta must be nonnegative")
    p_hat = data.p_hat() if isinstance(data, CountData) else np.asarray(data, dtype=float)
    p = _cell_prob_vector(params.a, design._arrays)
    if beta == 0.0 and np.any((p_hat > 0.0) & (p == 0.0)):
        raise DomainError("KL divergence is infinite: a populated cell has zero model probability")
    return _loss_value(p_hat, p, beta)


def estimating_equation_residual(
    params: ModelParams, data: CountData, design: StepStressDesign, beta: float
) -> np.ndarray:
    """Residual ``W^T D_p^(beta-1) (p_hat - p)`` of the estimating equations.

    Proportional to the loss gradient (factor ``-(1+beta)``), so a zero
    residual characterizes stationary points of :func:`dpd_loss`.
    """
    p_hat = data.p_hat() if isinstance(data, CountData) else np.asarray(data, dtype=float)
    dz = design._arrays
    p = np.maximum(_cell_prob_vector(params.a, dz), _TINY)
    W = _derivative_matrix(params.a, dz)
    return W.T @ (p ** (beta - 1.0) * (p_hat - p))


# ---------------------------------------------------------------------------
# information matrices
# ---------------------------------------------------------------------------

def _information_matrices(a: np.ndarray, dz, beta: float):
    p = np.maximum(_cell_prob_vector(a, dz), _TINY)
    W = _derivative_matrix(a, dz)
    J = W.T @ ((p ** (beta - 1.0))[:, None] * W)
    u = W.T @ (p**beta)
    K = W.T @ ((p ** (2.0 * beta - 1.0))[:, None] * W) - np.outer(u, u)
    return J, K


def asymptotic_covariance(params: ModelParams, design: StepStressDesign, beta: float) -> np.ndarray:
    """Sandwich covariance ``J^-1 K J^-1`` of the sqrt(N)-normalized estimator."""
    J, K = _information_matrices(params.a, design._arrays, beta)
    return _sandwich(J, K)


def _sandwich(J: np.ndarray, K: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInformationError(f"information matrix is ill-conditioned (cond={cond:.3g})")
    Jinv_K = np.linalg.solve(J, K)
    sigma = np.linalg.solve(J, Jinv_K.T).T
    return 0.5 * (sigma + sigma.T)


# ---------------------------------------------------------------------------
# initialization and optimization
# ---------------------------------------------------------------------------

def _moment_initializer(p_hat: np.ndarray, dz) -> np.ndarray:
    """Closed-form starting point from per-phase failure fractions.

    The aggregate hazard of each phase comes from the survival drop across
    the phase; it is split across risks by the observed cause shares.
    """
    P = p_hat[:-1].reshape(dz.L, dz.R)
    low = dz.level == 0
    f1 = P[low].sum()
    f2 = P[~low].sum()
    s1 = min(max(1.0 - f1, 1e-8), 1.0 - 1e-12)
    s2 = min(max(p_hat[-1], s1 * 1e-8), s1 * (1.0 - 1e-12))
    lam1 = -np.log(s1) / dz.tau1
    lam2 = -np.log(s2 / s1) / (dz.tau2 - dz.tau1)
    share1 = np.maximum(P[low].sum(axis=0), 1e-12)
    share2 = np.maximum(P[~low].sum(axis=0), 1e-12)
    lam1j = np.maximum(lam1 * share1 / share1.sum(), 1e-300)
    lam2j = np.maximum(lam2 * share2 / share2.sum(), 1e-300)
    x1, x2 = dz.x_levels
    a1 = (np.log(lam1j) - np.log(lam2j)) / (x2 - x1)
    a0 = -np.log(lam1j) - a1 * x1
    out = np.empty(2 * dz.R)
    out[0::2] = a0
    out[1::2] = a1
    return out


def _scoring_minimize(start, p_hat, dz, beta, options: FitOptions):
    """Fisher-scoring descent: Newton steps with the expected information.

    The information matrix is positive semidefinite by construction, so the
    step is a descent direction; backtracking makes the iteration globally
    convergent and it is quadratically fast near the minimum.
    """
    a = np.asarray(start, dtype=float).copy()
    loss, grad, J = _loss_and_grad(a, p_hat, dz, beta, with_info=True)
    n_iter = 0
    for _ in range(options.max_iterations):
        if not np.isfinite(loss):
            break
        gnorm = np.linalg.norm(grad)
        if gnorm < 0.25 * options.gradient_tol * (1.0 + abs(loss)):
            break
        try:
            step = -np.linalg.solve(J + 1e-12 * np.trace(J) * np.eye(J.shape[0]), grad)
        except np.linalg.LinAlgError:
            break
        slope = float(grad @ step)
        if slope >= 0.0:  # numerically not a descent direction
            step = -grad
            slope = -float(grad @ grad)
        t = 1.0
        for _ in range(40):
            cand = a + t * step
            new_loss, new_grad, new_J = _loss_and_grad(cand, p_hat, dz, beta, with_info=True)
            if np.isfinite(new_loss) and new_loss <= loss + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        stalled = loss - new_loss <= 1e-15 * (1.0 + abs(loss))
        a, loss, grad, J = cand, new_loss, new_grad, new_J
        n_iter += 1
        if stalled:  # progress below float noise; leave the last digits to the polish
            break
    return a, loss, grad, n_iter


def _minimize_from(start, p_hat, dz, beta, options: FitOptions):
    fun = lambda a: _loss_and_grad(a, p_hat, dz, beta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # BFGS complains near machine precision
        res = optimize.minimize(
            fun,
            np.asarray(start, dtype=float),
            jac=True,
            method="BFGS",
            options={"gtol": options.gradient_tol / 2.0, "maxiter": options.max_iterations},
        )
    return res


def _polish(a, p_hat, dz, beta, options: FitOptions):
    """Drive the estimating equations to machine precision from a good point."""
    fun = lambda v: _loss_and_grad(v, p_hat, dz, beta)[1]
    loss0, g0 = _loss_and_grad(a, p_hat, dz, beta)
    try:
        sol = optimize.root(fun, a, method="hybr", options={"xtol": 1e-13})
    except Exception:
        return a
    loss1, g1 = _loss_and_grad(sol.x, p_hat, dz, beta)
    better_grad = np.linalg.norm(g1) < np.linalg.norm(g0)
    no_worse = loss1 <= loss0 + 1e-10 * (1.0 + abs(loss0))
    if np.all(np.isfinite(sol.x)) and better_grad and no_worse:
        return sol.x
    return a


def fit(
    data: CountData,
    design: StepStressDesign,
    beta: float = 0.0,
    options: FitOptions | None = None,
) -> FitResult:
    """Minimum DPD estimate of the model parameters from observed counts.

    Raises :class:`IllPosedError` unless every risk shows at least one
    failure under each stress level.  Non-convergence is reported through
    ``FitResult.converged`` rather than an exception so Monte Carlo callers
    can count and discard failed replicates.
    """
    if not data.is_well_posed(design):
        raise IllPosedError(
            "need at least one failure per competing risk under each stress level"
        )
    return fit_probability_vector(data.p_hat(), design, beta, data.n_units, options)


def fit_probability_vector(
    p_hat: np.ndarray,
    design: StepStressDesign,
    beta: float,
    n_units: int,
    options: FitOptions | None = None,
) -> FitResult:
    """Fit directly to an empirical probability vector.

    Used by :func:`fit` and by callers that work with fractional cell masses
    (contamination analysis, theoretical checks).
    """
    if beta < 0.0:
        raise DomainError("beta must be nonnegative")
    options = options or FitOptions()
    dz = design._arrays
    p_hat = np.asarray(p_hat, dtype=float)
    if p_hat.shape != (dz.n_cells,):
        raise ValueError(f"probability vector must have length {dz.n_cells}")

    moment = _moment_initializer(p_hat, dz)
    starts: list[np.ndarray] = []
    if options.warm_start is not None:
        starts.append(np.asarray(options.warm_start.a, dtype=float))
    elif beta > 0.0 and options.multistart:
        ml, _, _, _ = _scoring_minimize(moment, p_hat, dz, 0.0, options)
        if np.all(np.isfinite(ml)):
            starts.append(ml)
    starts.append(moment)

    best_a, best_loss = starts[-1], np.inf
    n_iter = 0
    method = "scoring"
    for start in starts:
        a_try, loss_try, _, nit = _scoring_minimize(start, p_hat, dz, beta, options)
        n_iter += nit
        if np.isfinite(loss_try) and loss_try < best_loss:
            best_a, best_loss = a_try, loss_try
    a_hat = np.asarray(best_a, dtype=float)

    if options.polish and np.all(np.isfinite(a_hat)):
        a_hat = _polish(a_hat, p_hat, dz, beta, options)
    loss, grad = _loss_and_grad(a_hat, p_hat, dz, beta)
    tol = options.gradient_tol * (1.0 + abs(loss))
    if np.all(np.isfinite(a_hat)) and np.linalg.norm(grad) > tol:
        res = _minimize_from(a_hat, p_hat, dz, beta, options)
        n_iter += res.nit
        if np.all(np.isfinite(res.x)) and res.fun <= loss:
            a_hat = res.x
            method = "scoring+bfgs"
        loss, grad = _loss_and_grad(a_hat, p_hat, dz, beta)
    if options.simplex_fallback and (
        not np.all(np.isfinite(a_hat)) or np.linalg.norm(grad) > 1e3 * tol
    ):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            nm = optimize.minimize(
                lambda a: _loss_and_grad(a, p_hat, dz, beta)[0],
                a_hat if np.all(np.isfinite(a_hat)) else starts[-1],
                method="Nelder-Mead",
                options={"maxiter": 4000, "xatol": 1e-12, "fatol": 1e-14},
            )
        if np.isfinite(nm.fun) and nm.fun <= loss:
            a_hat = nm.x
            method = "scoring+nelder-mead"
        n_iter += nm.nit
        if options.polish:
            a_hat = _polish(a_hat, p_hat, dz, beta, options)

    loss, grad = _loss_and_grad(a_hat, p_hat, dz, beta)
    gradient_norm = float(np.linalg.norm(grad))
    converged = bool(np.all(np.isfinite(a_hat)) and gradient_norm < tol)

    params_hat = ModelParams(a_hat)
    covariance = None
    if options.compute_covariance:
        covariance = asymptotic_covariance(params_hat, design, beta)

    return FitResult(
        params_hat=params_hat,
        beta=beta,
        loss=float(loss),
        covariance=covariance,
        converged=converged,
        gradient_norm=gradient_norm,
        n_units=int(n_units),
        design=design,
        p_hat=p_hat,
        n_iterations=int(n_iter),
        method=method,
    )


def param_confidence_interval(fit_result: FitResult, level: float = 0.95) -> np.ndarray:
    """Per-parameter normal confidence intervals ``a_hat +/- z * sqrt(Sigma_ii / N)``.

    Returns an ``(2R, 2)`` array of (lower, upper) bounds.
    """
    if not 0.0 <= level < 1.0:
        raise DomainError("confidence level must be in [0, 1)")
    z = norm.ppf(0.5 + level / 2.0)
    se = fit_result.std_errors()
    a = fit_result.params_hat.a
    return np.column_stack([a - z * se, a + z * se])
