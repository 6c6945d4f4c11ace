import mpmath
import numpy as np
import pytest
from scipy.optimize import minimize

from stepstress.bootstrap import simulate_dataset
from stepstress.errors import DomainError, IllPosedError
from stepstress.estimation import (
    CountData,
    FitOptions,
    asymptotic_covariance,
    dpd_loss,
    estimating_equation_residual,
    fit,
    fit_probability_vector,
    param_confidence_interval,
    _loss_value,
)
from stepstress.model import ModelParams, StepStressDesign, cell_probabilities

from conftest import random_design, random_params


def exact_counts(params, design, n_units):
    """Counts proportional to the model cells (rounded, survivors absorb the slack)."""
    p = cell_probabilities(params, design).p
    n = np.rint(p[:-1] * n_units).astype(int).reshape(-1, design.num_risks)
    return CountData(n=n, n0=n_units - int(n.sum()))


# ---------------------------------------------------------------------------
# CountData
# ---------------------------------------------------------------------------

def test_count_data_totals(mc_design):
    data = CountData(n=np.ones((7, 2), dtype=int), n0=6)
    assert data.n_units == 20
    assert data.num_failures == 14
    assert data.p_hat().sum() == pytest.approx(1.0)


def test_count_data_rejects_negative():
    with pytest.raises(ValueError):
        CountData(n=np.array([[1, -1]]), n0=0)


def test_well_posedness_flag(mc_design):
    n = np.zeros((7, 2), dtype=int)
    n[0, 0] = 3  # risk 2 never fails
    n[5, 0] = 2
    data = CountData(n=n, n0=30)
    assert not data.is_well_posed(mc_design)
    with pytest.raises(IllPosedError):
        fit(data, mc_design, 0.0)


# ---------------------------------------------------------------------------
# DPD loss
# ---------------------------------------------------------------------------

def test_loss_zero_at_truth(mc_design, mc_params):
    p = cell_probabilities(mc_params, mc_design).p
    for beta in (0.0, 0.3, 1.0):
        assert _loss_value(p, p, beta) == pytest.approx(0.0, abs=1e-14)


def test_two_cell_value_against_mpmath():
    # d_beta(p_hat, p) on a two-cell model, evaluated symbolically at 50 digits
    mpmath.mp.dps = 50
    beta = mpmath.mpf("0.5")
    p_hat = [mpmath.mpf("0.5")] * 2
    p = [mpmath.mpf("0.8"), mpmath.mpf("0.2")]
    expected = sum(
        q ** (1 + beta) - (1 + 1 / beta) * qh * q**beta + qh ** (1 + beta) / beta
        for qh, q in zip(p_hat, p)
    )
    got = _loss_value(np.array([0.5, 0.5]), np.array([0.8, 0.2]), 0.5)
    assert got == pytest.approx(float(expected), rel=1e-14)


def test_beta_to_zero_continuity(mc_design, mc_params):
    rng = np.random.default_rng(3)
    data = simulate_dataset(mc_params, mc_design, 360, rng)
    kl = dpd_loss(mc_params, data, mc_design, 0.0)
    near = dpd_loss(mc_params, data, mc_design, 1e-4)
    assert abs(near - kl) < 1e-3


def test_kl_raises_on_infinite_divergence(mc_design):
    # force a model probability to underflow to zero while the cell has data
    params = ModelParams.from_pairs([(-30.0, 0.0), (-30.0, 0.0)])
    n = np.zeros((7, 2), dtype=int)
    n[:, :] = 1
    data = CountData(n=n, n0=346)
    assert cell_probabilities(params, mc_design).survival == 0.0
    with pytest.raises(DomainError):
        dpd_loss(params, data, mc_design, 0.0)


def test_negative_beta_rejected(mc_design, mc_params):
    data = exact_counts(mc_params, mc_design, 360)
    with pytest.raises(DomainError):
        dpd_loss(mc_params, data, mc_design, -0.1)


# ---------------------------------------------------------------------------
# estimating equations
# ---------------------------------------------------------------------------

def test_residual_zero_at_exact_probabilities(mc_design, mc_params):
    p = cell_probabilities(mc_params, mc_design).p
    for beta in (0.0, 0.4, 1.0):
        r = estimating_equation_residual(mc_params, p, mc_design, beta)
        assert np.abs(r).max() < 1e-14


def test_residual_proportional_to_loss_gradient(mc_design, mc_params):
    rng = np.random.default_rng(11)
    data = simulate_dataset(mc_params, mc_design, 360, rng)
    step = 1e-6
    for beta in (0.0, 0.2, 0.5, 1.0):
        resid = estimating_equation_residual(mc_params, data, mc_design, beta)
        grad_fd = np.empty_like(resid)
        for k in range(resid.size):
            hi, lo = mc_params.a.copy(), mc_params.a.copy()
            hi[k] += step
            lo[k] -= step
            grad_fd[k] = (
                dpd_loss(ModelParams(hi), data, mc_design, beta)
                - dpd_loss(ModelParams(lo), data, mc_design, beta)
            ) / (2 * step)
        factor = -(1.0 + beta) if beta > 0 else -1.0
        scale = np.maximum(np.abs(grad_fd), 1e-9)
        assert (np.abs(factor * resid - grad_fd) / scale).max() < 1e-6


def test_beta_zero_residual_is_score(mc_design, mc_params):
    # at beta=0 the residual equals the gradient of the per-unit log-likelihood
    rng = np.random.default_rng(5)
    data = simulate_dataset(mc_params, mc_design, 360, rng)
    nvec = data.p_hat()

    def loglik(a):
        p = cell_probabilities(ModelParams(a), mc_design).p
        return float(np.sum(nvec * np.log(p)))

    step = 1e-6
    resid = estimating_equation_residual(mc_params, data, mc_design, 0.0)
    for k in range(4):
        hi, lo = mc_params.a.copy(), mc_params.a.copy()
        hi[k] += step
        lo[k] -= step
        fd = (loglik(hi) - loglik(lo)) / (2 * step)
        assert resid[k] == pytest.approx(fd, rel=2e-6, abs=1e-9)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def test_fit_recovers_exact_model_counts(mc_design, mc_params):
    data = exact_counts(mc_params, mc_design, 2_000_000)
    for beta in (0.0, 0.5, 1.0):
        res = fit(data, mc_design, beta)
        assert res.converged
        np.testing.assert_allclose(res.params_hat.a, mc_params.a, atol=1e-2)


def test_fit_beta_zero_matches_independent_ml(mc_design, mc_params):
    rng = np.random.default_rng(17)
    data = simulate_dataset(mc_params, mc_design, 360, rng)
    res = fit(data, mc_design, 0.0)

    nvec = np.concatenate([data.n.ravel(), [data.n0]]).astype(float)

    def nll(a):
        p = np.maximum(cell_probabilities(ModelParams(a), mc_design).p, 1e-300)
        return -float(nvec @ np.log(p))

    start = res.params_hat.a + rng.normal(0, 0.05, size=4)
    ind = minimize(nll, start, method="Nelder-Mead",
                   options={"maxiter": 40000, "xatol": 1e-11, "fatol": 1e-14})
    np.testing.assert_allclose(res.params_hat.a, ind.x, atol=1e-6)


def test_fit_probability_vector_matches_count_fit(mc_design, mc_params):
    rng = np.random.default_rng(23)
    data = simulate_dataset(mc_params, mc_design, 360, rng)
    a = fit(data, mc_design, 0.4).params_hat.a
    b = fit_probability_vector(data.p_hat(), mc_design, 0.4, data.n_units).params_hat.a
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_grid_search_finds_no_better_point(single_risk_design):
    truth = ModelParams.from_pairs([(1.4, 0.2)])
    rng = np.random.default_rng(31)
    data = simulate_dataset(truth, single_risk_design, 400, rng)
    for beta in (0.0, 0.5):
        res = fit(data, single_risk_design, beta)
        assert res.converged
        a0 = np.linspace(truth.a[0] - 0.6, truth.a[0] + 0.6, 200)
        a1 = np.linspace(truth.a[1] - 0.6, truth.a[1] + 0.6, 200)
        best = np.inf
        for u in a0:
            for v in a1:
                best = min(best, dpd_loss(ModelParams([u, v]), data, single_risk_design, beta))
        assert res.loss <= best + 1e-12


def test_consistency_with_sample_size(mc_design, mc_params):
    errs = {}
    for n_units in (360, 1440):
        e = []
        for rep in range(200):
            rng = np.random.default_rng((rep, n_units))
            data = simulate_dataset(mc_params, mc_design, n_units, rng)
            res = fit(data, mc_design, 0.0, FitOptions(compute_covariance=False))
            if res.converged:
                e.append(np.abs(res.params_hat.a - mc_params.a).max())
        errs[n_units] = np.median(e)
    assert errs[1440] < errs[360]


def test_nonconverged_fit_reports_status(mc_design, mc_params):
    rng = np.random.default_rng(2)
    data = simulate_dataset(mc_params, mc_design, 360, rng)
    res = fit(data, mc_design, 0.0, FitOptions(max_iterations=1, polish=False,
                                               simplex_fallback=False,
                                               warm_start=ModelParams([9.0, 1.0, -4.0, 2.0]),
                                               multistart=False,
                                               compute_covariance=False))
    assert not res.converged
    assert res.gradient_norm > 0


# ---------------------------------------------------------------------------
# covariance and confidence intervals
# ---------------------------------------------------------------------------

def test_covariance_beta_zero_is_inverse_fisher(mc_design, mc_params):
    from stepstress.model import derivative_matrix

    sigma = asymptotic_covariance(mc_params, mc_design, 0.0)
    p = cell_probabilities(mc_params, mc_design).p
    W = derivative_matrix(mc_params, mc_design).W
    fisher = W.T @ (W / p[:, None])
    np.testing.assert_allclose(sigma @ fisher, np.eye(4), atol=1e-8)


def test_covariance_symmetric_psd_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        design = random_design(rng)
        params = random_params(rng, design)
        beta = float(rng.uniform(0, 1))
        sigma = asymptotic_covariance(params, design, beta)
        np.testing.assert_allclose(sigma, sigma.T, atol=1e-8)
        eigs = np.linalg.eigvalsh(sigma)
        assert eigs.min() > -1e-8 * max(1.0, eigs.max())


def test_covariance_matches_monte_carlo(mc_design, mc_params):
    # empirical covariance of sqrt(N)(a_hat - a0) vs the sandwich, 1000 clean reps
    n_units = 360
    draws = []
    for rep in range(1000):
        rng = np.random.default_rng((101, rep))
        data = simulate_dataset(mc_params, mc_design, n_units, rng)
        res = fit(data, mc_design, 0.0, FitOptions(compute_covariance=False))
        if res.converged:
            draws.append(np.sqrt(n_units) * (res.params_hat.a - mc_params.a))
    emp = np.cov(np.array(draws).T)
    sigma = asymptotic_covariance(mc_params, mc_design, 0.0)
    rel = np.abs(np.diag(emp) - np.diag(sigma)) / np.diag(sigma)
    assert rel.max() < 0.15


def test_param_ci_zero_width_at_level_zero(mc_design, mc_params):
    data = exact_counts(mc_params, mc_design, 5000)
    res = fit(data, mc_design, 0.0)
    ci = param_confidence_interval(res, level=0.0)
    np.testing.assert_allclose(ci[:, 0], ci[:, 1], atol=1e-12)
    np.testing.assert_allclose(ci[:, 0], res.params_hat.a, atol=1e-12)


def test_param_ci_coverage_clean(mc_design, mc_params):
    hits = np.zeros(4)
    total = 0
    for rep in range(300):
        rng = np.random.default_rng((202, rep))
        data = simulate_dataset(mc_params, mc_design, 360, rng)
        res = fit(data, mc_design, 0.0)
        if not res.converged:
            continue
        ci = param_confidence_interval(res, 0.95)
        hits += (ci[:, 0] <= mc_params.a) & (mc_params.a <= ci[:, 1])
        total += 1
    coverage = hits / total
    assert np.all(coverage >= 0.91) and np.all(coverage <= 0.99)


def test_param_ci_width_scales_with_sqrt_n(mc_design, mc_params):
    widths = {}
    for n_units in (360, 1440):
        acc = []
        for rep in range(40):
            rng = np.random.default_rng((303, rep, n_units))
            data = simulate_dataset(mc_params, mc_design, n_units, rng)
            res = fit(data, mc_design, 0.0)
            ci = param_confidence_interval(res, 0.95)
            acc.append(ci[:, 1] - ci[:, 0])
        widths[n_units] = np.mean(acc, axis=0)
    ratio = widths[360] / widths[1440]
    assert np.all(ratio > 1.7) and np.all(ratio < 2.3)
