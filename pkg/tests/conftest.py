import numpy as np
import pytest

from stepstress.model import ModelParams, StepStressDesign


@pytest.fixture(scope="session")
def mc_design() -> StepStressDesign:
    """Two-risk design: stress 35 -> 45 at 45h, termination 75h, 10h inspections."""
    return StepStressDesign(
        x1=35.0, x2=45.0, tau1=45.0, tau2=75.0,
        inspection_times=(15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0),
        num_risks=2,
    )


@pytest.fixture(scope="session")
def mc_params() -> ModelParams:
    return ModelParams.from_pairs([(5.0, -0.02), (6.2, -0.04)])


@pytest.fixture(scope="session")
def single_risk_design() -> StepStressDesign:
    return StepStressDesign(
        x1=1.0, x2=2.0, tau1=4.0, tau2=8.0,
        inspection_times=(2.0, 4.0, 6.0, 8.0), num_risks=1,
    )


def random_design(rng: np.random.Generator) -> StepStressDesign:
    """A random valid design for property tests."""
    L = int(rng.integers(2, 7))
    gaps = rng.uniform(0.5, 20.0, size=L)
    times = np.cumsum(gaps)
    tau1_idx = int(rng.integers(0, L - 1))
    R = int(rng.integers(1, 4))
    x1 = rng.uniform(-3.0, 40.0)
    x2 = x1 + rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 15.0)
    return StepStressDesign(
        x1=x1, x2=x2, tau1=times[tau1_idx], tau2=times[-1],
        inspection_times=tuple(times), num_risks=R,
    )


def random_params(rng: np.random.Generator, design: StepStressDesign) -> ModelParams:
    """Parameters whose scales stay in a numerically comfortable range."""
    R = design.num_risks
    a = np.empty(2 * R)
    xs = np.array([design.x1, design.x2])
    for j in range(R):
        # choose log-scales at the two stress levels, derive the line through them
        log_th = rng.uniform(np.log(design.tau2 / 20.0), np.log(design.tau2 * 20.0), size=2)
        a1 = (log_th[1] - log_th[0]) / (xs[1] - xs[0])
        a0 = log_th[0] - a1 * xs[0]
        a[2 * j] = a0
        a[2 * j + 1] = a1
    return ModelParams(a)
