"""Monte Carlo engine: contaminated data generation, MSE sweeps, CI coverage.

Replications are embarrassingly parallel; every replicate derives its RNG
stream from ``(seed, replicate_index)`` so results are identical whatever
the worker count.  Contamination replaces a fixed fraction of units with
draws from a multinomial spreading equal mass over a configurable set of
outlier cells, which is the stress test under which the likelihood-based
fit breaks down while large-beta fits stay close to the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from . import characteristics as chars
from .bootstrap import BootstrapConfig, _draw_counts, bca_interval
from .errors import DegenerateDataError, DomainError, SimulationError
from .estimation import CountData, FitOptions, fit
from .model import ModelParams, StepStressDesign

__all__ = [
    "SimulationScenario",
    "MseStudyResult",
    "CoverageStudyResult",
    "contamination_cells_for_intervals",
    "generate_contaminated",
    "run_mse_study",
    "run_coverage_study",
]


def contamination_cells_for_intervals(design: StepStressDesign, intervals, risks=None):
    """All (interval, risk) cells for the given 0-based interval indices."""
    risks = range(design.num_risks) if risks is None else risks
    return tuple((int(l), int(j)) for l in intervals for j in risks)


@dataclass(frozen=True)
class SimulationScenario:
    """One Monte Carlo configuration: design, truth, contamination, budget."""

    design: StepStressDesign
    true_params: ModelParams
    n_units: int
    contamination_fraction: float = 0.0
    contamination_cells: tuple = ()
    replications: int = 1000
    betas: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    seed: int = 0
    t0: float | None = None
    alpha0: float = 0.5
    level: float = 0.95
    max_regenerations: int = 100

    def __post_init__(self):
        if not 0.0 <= self.contamination_fraction < 1.0:
            raise DomainError("contamination fraction must be in [0, 1)")
        if self.contamination_fraction > 0.0 and not self.contamination_cells:
            raise DomainError("contamination requires a nonempty set of outlier cells")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(
            self, "contamination_cells", tuple((int(l), int(j)) for l, j in self.contamination_cells)
        )


@dataclass(frozen=True)
class MseStudyResult:
    """Per-beta mean squared errors over the successful replications."""

    betas: tuple
    epsilon: float
    mse_params: np.ndarray  # (n_betas, 2R)
    mse_mttf: np.ndarray
    mse_reliability: np.ndarray
    mse_quantile: np.ndarray
    n_used: np.ndarray
    n_failed: np.ndarray

    def to_dict(self) -> dict:
        return {
            "betas": list(self.betas),
            "epsilon": self.epsilon,
            "mse_params": self.mse_params.tolist(),
            "mse_mttf": self.mse_mttf.tolist(),
            "mse_reliability": self.mse_reliability.tolist(),
            "mse_quantile": self.mse_quantile.tolist(),
            "n_used": self.n_used.tolist(),
            "n_failed": self.n_failed.tolist(),
        }


@dataclass(frozen=True)
class CoverageStudyResult:
    """Empirical coverage and mean width per (beta, method)."""

    betas: tuple
    epsilon: float
    characteristic: object
    methods: tuple
    true_value: float
    coverage: np.ndarray  # (n_betas, n_methods)
    mean_width: np.ndarray
    n_used: np.ndarray
    n_failed: np.ndarray

    def to_dict(self) -> dict:
        return {
            "betas": list(self.betas),
            "epsilon": self.epsilon,
            "characteristic": str(self.characteristic),
            "methods": list(self.methods),
            "true_value": self.true_value,
            "coverage": self.coverage.tolist(),
            "mean_width": self.mean_width.tolist(),
            "n_used": self.n_used.tolist(),
            "n_failed": self.n_failed.tolist(),
        }


# ---------------------------------------------------------------------------
# data generation
# ---------------------------------------------------------------------------

def generate_contaminated(scenario: SimulationScenario, rng: np.random.Generator) -> CountData:
    """Model draws for most units, outlier-cell multinomial draws for the rest.

    ``floor(eps * N)`` units land uniformly on the configured outlier cells;
    the remaining units follow the true model.  The merged counts must be
    well posed, otherwise the whole dataset is redrawn.
    """
    design, n_units = scenario.design, scenario.n_units
    n_out = int(np.floor(scenario.contamination_fraction * n_units))
    cells = scenario.contamination_cells
    for _ in range(scenario.max_regenerations):
        clean = _draw_counts(scenario.true_params, design, n_units - n_out, rng)
        n = np.array(clean.n, copy=True)
        n0 = clean.n0
        if n_out > 0:
            extra = rng.multinomial(n_out, np.full(len(cells), 1.0 / len(cells)))
            for (l, j), c in zip(cells, extra):
                n[l, j] += c
        data = CountData(n=n, n0=n0)
        if data.is_well_posed(design):
            return data
    raise DegenerateDataError(
        f"no well-posed contaminated dataset in {scenario.max_regenerations} attempts"
    )


def _replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, rep)))


def _child_seed(seed: int, rep: int, stream: int) -> int:
    return int(np.random.SeedSequence((seed, rep, stream)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# MSE study
# ---------------------------------------------------------------------------

def _mse_replicate(scenario: SimulationScenario, rep: int):
    rng = _replicate_rng(scenario.seed, rep)
    design = scenario.design
    try:
        data = generate_contaminated(scenario, rng)
    except DegenerateDataError:
        return None
    rows = []
    warm = None
    for beta in scenario.betas:
        opts = FitOptions(warm_start=warm, compute_covariance=False)
        try:
            res = fit(data, design, beta, opts)
        except Exception:
            rows.append(None)
            continue
        if not res.converged:
            rows.append(None)
            continue
        if beta == 0.0:
            warm = res.params_hat
        p = res.params_hat
        entry = [p.a]
        entry.append(chars.mttf_value(p, design))
        if scenario.t0 is not None:
            entry.append(chars.reliability_value(p, design, scenario.t0))
        else:
            entry.append(np.nan)
        entry.append(chars.quantile_value(p, design, scenario.alpha0))
        rows.append(entry)
    return rows


def run_mse_study(scenario: SimulationScenario, n_jobs: int = 1) -> MseStudyResult:
    """Parameter and characteristic MSEs of the estimators across the beta grid.

    Replicates whose fit fails for a given beta are dropped from that beta's
    average and counted; more than 20% failures for any beta aborts the
    study since the averages would no longer be comparable.
    """
    reps = range(scenario.replications)
    if n_jobs != 1:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_mse_replicate)(scenario, r) for r in reps
        )
    else:
        results = [_mse_replicate(scenario, r) for r in reps]

    design = scenario.design
    truth = scenario.true_params
    true_vals = [
        chars.mttf_value(truth, design),
        chars.reliability_value(truth, design, scenario.t0) if scenario.t0 is not None else np.nan,
        chars.quantile_value(truth, design, scenario.alpha0),
    ]
    n_betas = len(scenario.betas)
    dim = truth.a.size
    mse_params = np.zeros((n_betas, dim))
    mse_char = np.zeros((n_betas, 3))
    n_used = np.zeros(n_betas, dtype=int)
    n_failed = np.zeros(n_betas, dtype=int)
    for res in results:
        for bi in range(n_betas):
            row = None if res is None else res[bi]
            if row is None:
                n_failed[bi] += 1
                continue
            n_used[bi] += 1
            mse_params[bi] += (row[0] - truth.a) ** 2
            mse_char[bi] += np.array(
                [
                    (row[1] - true_vals[0]) ** 2,
                    (row[2] - true_vals[1]) ** 2 if scenario.t0 is not None else 0.0,
                    (row[3] - true_vals[2]) ** 2,
                ]
            )
    if np.any(n_failed > 0.2 * scenario.replications):
        raise SimulationError(
            f"more than 20% of replicates failed to fit: {n_failed.tolist()}"
        )
    with np.errstate(invalid="ignore"):
        mse_params /= np.maximum(n_used, 1)[:, None]
        mse_char /= np.maximum(n_used, 1)[:, None]
    return MseStudyResult(
        betas=scenario.betas,
        epsilon=scenario.contamination_fraction,
        mse_params=mse_params,
        mse_mttf=mse_char[:, 0],
        mse_reliability=mse_char[:, 1] if scenario.t0 is not None else np.full(n_betas, np.nan),
        mse_quantile=mse_char[:, 2],
        n_used=n_used,
        n_failed=n_failed,
    )


# ---------------------------------------------------------------------------
# coverage study
# ---------------------------------------------------------------------------

def _characteristic_estimate(fit_result, characteristic, level):
    if characteristic == "mttf":
        return chars.mttf(fit_result, level)
    kind, arg = characteristic
    if kind == "reliability":
        return chars.reliability(fit_result, arg, level)
    if kind == "quantile":
        return chars.quantile(fit_result, arg, level)
    raise DomainError(f"unknown characteristic: {characteristic!r}")


def true_characteristic(scenario: SimulationScenario, characteristic) -> float:
    design, truth = scenario.design, scenario.true_params
    if characteristic == "mttf":
        return chars.mttf_value(truth, design)
    kind, arg = characteristic
    if kind == "reliability":
        return chars.reliability_value(truth, design, arg)
    if kind == "quantile":
        return chars.quantile_value(truth, design, arg)
    raise DomainError(f"unknown characteristic: {characteristic!r}")


def _coverage_replicate(scenario, rep, characteristic, methods, B):
    rng = _replicate_rng(scenario.seed, rep)
    design = scenario.design
    try:
        data = generate_contaminated(scenario, rng)
    except DegenerateDataError:
        return None
    out = []
    warm = None
    for beta in scenario.betas:
        opts = FitOptions(warm_start=warm)
        try:
            res = fit(data, design, beta, opts)
            if not res.converged:
                raise SimulationError("fit did not converge")
            if beta == 0.0:
                warm = res.params_hat
            est = _characteristic_estimate(res, characteristic, scenario.level)
            intervals = {}
            if "direct" in methods:
                intervals["direct"] = est.ci_direct
            if "transformed" in methods:
                intervals["transformed"] = est.ci_transformed
            if "bca" in methods:
                cfg = BootstrapConfig(
                    B=B,
                    seed=_child_seed(scenario.seed, rep, 1),
                    level=scenario.level,
                    target=characteristic,
                )
                bca = bca_interval(data, design, beta, cfg, fit0=res)
                intervals["bca"] = bca.interval
            out.append(intervals)
        except Exception:
            out.append(None)
    return out


def run_coverage_study(
    scenario: SimulationScenario,
    characteristic="mttf",
    methods=("direct", "transformed", "bca"),
    B: int = 1000,
    n_jobs: int = 1,
) -> CoverageStudyResult:
    """Empirical coverage of the true characteristic and mean interval width."""
    methods = tuple(methods)
    reps = range(scenario.replications)
    if n_jobs != 1:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_coverage_replicate)(scenario, r, characteristic, methods, B) for r in reps
        )
    else:
        results = [_coverage_replicate(scenario, r, characteristic, methods, B) for r in reps]

    true_val = true_characteristic(scenario, characteristic)
    n_betas = len(scenario.betas)
    cover = np.zeros((n_betas, len(methods)))
    width = np.zeros((n_betas, len(methods)))
    n_used = np.zeros(n_betas, dtype=int)
    n_failed = np.zeros(n_betas, dtype=int)
    for res in results:
        for bi in range(n_betas):
            row = None if res is None else res[bi]
            if row is None:
                n_failed[bi] += 1
                continue
            n_used[bi] += 1
            for mi, m in enumerate(methods):
                lo, hi = row[m]
                cover[bi, mi] += 1.0 if lo <= true_val <= hi else 0.0
                width[bi, mi] += hi - lo
    if np.any(n_failed > 0.2 * scenario.replications):
        raise SimulationError(
            f"more than 20% of replicates failed to fit: {n_failed.tolist()}"
        )
    cover /= np.maximum(n_used, 1)[:, None]
    width /= np.maximum(n_used, 1)[:, None]
    return CoverageStudyResult(
        betas=scenario.betas,
        epsilon=scenario.contamination_fraction,
        characteristic=characteristic,
        methods=methods,
        true_value=true_val,
        coverage=cover,
        mean_width=width,
        n_used=n_used,
        n_failed=n_failed,
    )
