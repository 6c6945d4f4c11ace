import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from stepstress.errors import DesignError
from stepstress.model import (
    CellProbabilities,
    ModelParams,
    StepStressDesign,
    cell_probabilities,
    derivative_matrix,
    lifetime_cdf,
    relative_risk,
    shifting_time,
)

from conftest import random_design, random_params


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------

def test_design_requires_tau1_among_inspections():
    with pytest.raises(DesignError):
        StepStressDesign(1.0, 2.0, tau1=3.0, tau2=8.0, inspection_times=(2.0, 4.0, 8.0))


def test_design_requires_increasing_times():
    with pytest.raises(DesignError):
        StepStressDesign(1.0, 2.0, tau1=4.0, tau2=8.0, inspection_times=(4.0, 2.0, 8.0))


def test_design_requires_distinct_stresses():
    with pytest.raises(DesignError):
        StepStressDesign(1.0, 1.0, tau1=2.0, tau2=4.0, inspection_times=(2.0, 4.0))


def test_design_defaults_operating_stress_to_first_level():
    d = StepStressDesign(3.0, 5.0, tau1=2.0, tau2=4.0, inspection_times=(2.0, 4.0))
    assert d.x0 == 3.0


def test_params_reject_non_finite():
    with pytest.raises(ValueError):
        ModelParams(np.array([1.0, np.inf]))


# ---------------------------------------------------------------------------
# shifting time
# ---------------------------------------------------------------------------

def test_shifting_time_zero_at_first_level(mc_design, mc_params):
    for j in (1, 2):
        assert shifting_time(mc_params, mc_design, risk=j, level=1) == 0.0


def test_shifting_time_zero_without_stress_effect(mc_design):
    params = ModelParams.from_pairs([(5.0, 0.0), (6.2, 0.0)])
    for j in (1, 2):
        assert shifting_time(params, mc_design, risk=j, level=2) == pytest.approx(0.0, abs=1e-15)


def test_shifting_time_closed_form(mc_design, mc_params):
    # 45 * (exp(-0.2) - 1), frozen from a 50-digit mpmath evaluation
    assert shifting_time(mc_params, mc_design, risk=1, level=2) == pytest.approx(
        -8.1571161114908135, rel=1e-14
    )


# ---------------------------------------------------------------------------
# relative risk
# ---------------------------------------------------------------------------

def test_relative_risk_single_risk(single_risk_design):
    params = ModelParams.from_pairs([(1.0, 0.3)])
    assert relative_risk(params, single_risk_design, level=1, risk=1) == 1.0


def test_relative_risk_symmetry(mc_design):
    params = ModelParams.from_pairs([(5.0, -0.02), (5.0, -0.02)])
    assert relative_risk(params, mc_design, 1, 1) == pytest.approx(0.5, rel=1e-14)
    assert relative_risk(params, mc_design, 2, 2) == pytest.approx(0.5, rel=1e-14)


def test_relative_risk_logistic_value(mc_design, mc_params):
    # theta_11 = e^4.3, theta_12 = e^4.8 so pi_11 = 1/(1 + e^-0.5)
    pi11 = relative_risk(mc_params, mc_design, 1, 1)
    assert pi11 == pytest.approx(1.0 / (1.0 + np.exp(-0.5)), rel=1e-14)
    assert pi11 + relative_risk(mc_params, mc_design, 1, 2) == pytest.approx(1.0, rel=1e-14)


# ---------------------------------------------------------------------------
# cell probabilities
# ---------------------------------------------------------------------------

def joint_density(params, design, t, risk):
    """Independent oracle: the failure-time/cause density written from scratch."""
    level = 0 if t <= design.tau1 else 1
    x = (design.x1, design.x2)[level]
    theta = np.exp(params.intercepts + params.slopes * x)
    theta1 = np.exp(params.intercepts + params.slopes * design.x1)
    h = np.zeros_like(theta) if level == 0 else design.tau1 * (theta / theta1 - 1.0)
    surv = np.exp(-np.sum((t + h) / theta))
    return surv / theta[risk]


def test_cell_probabilities_sum_to_one(mc_design, mc_params):
    cp = cell_probabilities(mc_params, mc_design)
    assert cp.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(cp.p >= 0.0)


def test_first_interval_mass(mc_design, mc_params):
    # survival at 0 is 1, so the first-interval mass is 1 - exp(-IT_1 * hazard)
    cp = cell_probabilities(mc_params, mc_design)
    lam1 = np.exp(-(mc_params.intercepts + mc_params.slopes * mc_design.x1)) .sum()
    assert cp.failure_matrix[0].sum() == pytest.approx(-np.expm1(-15.0 * lam1), rel=1e-12)


def test_cells_match_quadrature(mc_design, mc_params):
    cp = cell_probabilities(mc_params, mc_design)
    edges = (0.0,) + mc_design.inspection_times
    for l in range(mc_design.num_intervals):
        for j in range(mc_design.num_risks):
            val, _ = quad(
                lambda t: joint_density(mc_params, mc_design, t, j),
                edges[l], edges[l + 1], epsabs=1e-13, epsrel=1e-13,
            )
            assert abs(val - cp.failure_matrix[l, j]) < 1e-8


def test_single_risk_reduction(single_risk_design):
    # with one risk the cells are plain exponential step-stress interval masses
    params = ModelParams.from_pairs([(1.2, 0.25)])
    cp = cell_probabilities(params, single_risk_design)
    th1 = float(params.theta(single_risk_design.x1)[0])
    th2 = float(params.theta(single_risk_design.x2)[0])
    tau1 = single_risk_design.tau1

    def surv(t):
        if t <= tau1:
            return np.exp(-t / th1)
        return np.exp(-tau1 / th1 - (t - tau1) / th2)

    edges = (0.0,) + single_risk_design.inspection_times
    expected = [surv(a) - surv(b) for a, b in zip(edges[:-1], edges[1:])]
    np.testing.assert_allclose(cp.failure_matrix[:, 0], expected, rtol=1e-12)
    assert cp.survival == pytest.approx(surv(single_risk_design.tau2), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_normalization_property(seed):
    rng = np.random.default_rng(seed)
    design = random_design(rng)
    params = random_params(rng, design)
    cp = cell_probabilities(params, design)
    assert cp.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(cp.p >= 0.0)


# ---------------------------------------------------------------------------
# derivative matrix
# ---------------------------------------------------------------------------

def finite_difference_jacobian(params, design, step=1e-6):
    a = params.a
    cols = []
    for k in range(a.size):
        hi, lo = a.copy(), a.copy()
        hi[k] += step
        lo[k] -= step
        cols.append(
            (cell_probabilities(ModelParams(hi), design).p
             - cell_probabilities(ModelParams(lo), design).p) / (2.0 * step)
        )
    return np.column_stack(cols)


def test_derivative_matrix_column_sums_vanish(mc_design, mc_params):
    W = derivative_matrix(mc_params, mc_design).W
    assert np.abs(W.sum(axis=0)).max() < 1e-10


def test_derivative_matrix_matches_finite_differences(mc_design, mc_params):
    W = derivative_matrix(mc_params, mc_design).W
    fd = finite_difference_jacobian(mc_params, mc_design)
    rel = np.abs(W - fd) / np.maximum(np.abs(fd), 1e-10)
    assert rel.max() < 1e-6


def test_derivative_matrix_random_draws():
    rng = np.random.default_rng(42)
    for _ in range(25):
        design = random_design(rng)
        params = random_params(rng, design)
        W = derivative_matrix(params, design).W
        fd = finite_difference_jacobian(params, design)
        scale = np.maximum(np.abs(fd), 1e-9)
        assert (np.abs(W - fd) / scale).max() < 1e-5
        assert np.abs(W.sum(axis=0)).max() < 1e-10


def test_survival_row_derivative(mc_design, mc_params):
    # slope derivative of the survival probability against finite differences
    W = derivative_matrix(mc_params, mc_design).W
    step = 1e-7
    for k in range(4):
        hi, lo = mc_params.a.copy(), mc_params.a.copy()
        hi[k] += step
        lo[k] -= step
        fd = (
            cell_probabilities(ModelParams(hi), mc_design).survival
            - cell_probabilities(ModelParams(lo), mc_design).survival
        ) / (2 * step)
        assert W[-1, k] == pytest.approx(fd, rel=1e-6)


# ---------------------------------------------------------------------------
# lifetime CDF
# ---------------------------------------------------------------------------

def test_cdf_at_zero(mc_design, mc_params):
    assert lifetime_cdf(mc_params, mc_design, 0.0) == 0.0


def test_cdf_continuous_at_stress_change(mc_design, mc_params):
    left = lifetime_cdf(mc_params, mc_design, mc_design.tau1 - 1e-12)
    right = lifetime_cdf(mc_params, mc_design, mc_design.tau1)
    assert abs(left - right) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_cdf_continuity_property(seed):
    rng = np.random.default_rng(seed)
    design = random_design(rng)
    params = random_params(rng, design)
    left = lifetime_cdf(params, design, design.tau1 * (1 - 1e-13))
    right = lifetime_cdf(params, design, design.tau1)
    assert abs(left - right) < 1e-12


def test_cdf_increments_equal_cell_sums(mc_design, mc_params):
    cp = cell_probabilities(mc_params, mc_design)
    F = lifetime_cdf(mc_params, mc_design, np.array(mc_design.inspection_times))
    increments = np.diff(np.concatenate(([0.0], F)))
    np.testing.assert_allclose(increments, cp.failure_matrix.sum(axis=1), atol=1e-14)


def test_cdf_nondecreasing(mc_design, mc_params):
    grid = np.linspace(0.0, 2 * mc_design.tau2, 400)
    F = lifetime_cdf(mc_params, mc_design, grid)
    assert np.all(np.diff(F) >= -1e-15)


def test_marginal_cdf_combines_to_overall(mc_design, mc_params):
    t = np.array([10.0, 45.0, 60.0, 75.0])
    f1 = lifetime_cdf(mc_params, mc_design, t, risk=1)
    f2 = lifetime_cdf(mc_params, mc_design, t, risk=2)
    overall = lifetime_cdf(mc_params, mc_design, t)
    np.testing.assert_allclose(overall, 1 - (1 - f1) * (1 - f2), rtol=1e-12)


def test_cell_probability_container(mc_design, mc_params):
    cp = cell_probabilities(mc_params, mc_design)
    assert isinstance(cp, CellProbabilities)
    assert cp.failure_matrix.shape == (7, 2)
    assert cp.p.shape == (15,)
