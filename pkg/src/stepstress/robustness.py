"""Influence-function diagnostics for the divergence-based estimators.

Contamination lives on the multinomial cells: a contaminated sample puts all
of its mass on a single cell ``i0``.  The influence function of the
estimator at that cell is ``J_beta^-1 W^T D_p^(beta-1) (delta_i0 - p)``; its
largest Euclidean norm over cells is the gross-error sensitivity, and the
largest value of the quadratic form in the metric of the asymptotic
covariance is the self-standardized sensitivity.  Both shrink as the tuning
parameter grows, which is the quantitative robustness gain of the family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularInformationError
from .estimation import _information_matrices, _sandwich
from .model import ModelParams, StepStressDesign, _cell_prob_vector, _derivative_matrix

__all__ = [
    "SensitivityCurve",
    "influence_function",
    "influence_matrix",
    "sensitivity",
    "cell_sensitivity",
    "sensitivity_curve",
]

_KINDS = ("gross_error", "self_standardized")


@dataclass(frozen=True)
class SensitivityCurve:
    """Sensitivity values along a grid of tuning parameters."""

    betas: np.ndarray
    values: np.ndarray
    kind: str
    contamination_cells: np.ndarray

    def __post_init__(self):
        if len(self.betas) != len(self.values):
            raise ValueError("betas and values must have equal length")


def influence_matrix(params: ModelParams, design: StepStressDesign, beta: float) -> np.ndarray:
    """Influence functions of all cells, stacked as columns of a (2R, LR+1) array."""
    dz = design._arrays
    p = np.maximum(_cell_prob_vector(params.a, dz), np.finfo(float).tiny)
    W = _derivative_matrix(params.a, dz)
    J, _ = _information_matrices(params.a, dz, beta)
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularInformationError(f"information matrix is ill-conditioned (cond={cond:.3g})")
    WD = W.T * p[None, :] ** (beta - 1.0)  # (2R, cells)
    base = np.linalg.solve(J, WD)
    shift = np.linalg.solve(J, WD @ p)
    return base - shift[:, None]


def influence_function(
    params: ModelParams, design: StepStressDesign, beta: float, cell: int
) -> np.ndarray:
    """IF of the estimator for contamination concentrated on a single cell.

    ``cell`` is the 0-based index into the cell ordering of
    :class:`~stepstress.model.CellProbabilities` (survival cell last).
    """
    n_cells = design.num_cells
    if not 0 <= cell < n_cells:
        raise DomainError(f"cell index must be in 0..{n_cells - 1}")
    return influence_matrix(params, design, beta)[:, cell]


def sensitivity(
    params: ModelParams, design: StepStressDesign, beta: float, kind: str = "self_standardized"
) -> float:
    """Worst-case influence of cell contamination.

    ``gross_error`` is the largest Euclidean IF norm over the individual
    cells.  ``self_standardized`` measures influence in the metric of the
    estimator's own asymptotic covariance, so it is invariant to rescaling
    individual parameters: it is the spectral norm of the standardized
    quadratic-form matrix ``IF^T Sigma^-1 IF`` assembled over all cells,
    i.e. the supremum over contamination directions (mixtures of cells, of
    which single cells are the extreme points).
    """
    if kind not in _KINDS:
        raise DomainError(f"kind must be one of {_KINDS}")
    ifs = influence_matrix(params, design, beta)
    if kind == "gross_error":
        return float(np.linalg.norm(ifs, axis=0).max())
    J, K = _information_matrices(params.a, design._arrays, beta)
    sigma = _sandwich(J, K)
    quad_matrix = ifs.T @ np.linalg.solve(sigma, ifs)
    eigs = np.linalg.eigvalsh(0.5 * (quad_matrix + quad_matrix.T))
    return float(eigs[-1])


def cell_sensitivity(
    params: ModelParams, design: StepStressDesign, beta: float
) -> np.ndarray:
    """Standardized quadratic form ``IF^T Sigma^-1 IF`` cell by cell.

    Its probability-weighted average equals the parameter dimension ``2R``
    for every beta (the sandwich identity), which makes a useful invariant
    check; :func:`sensitivity` bounds this vector from above.
    """
    ifs = influence_matrix(params, design, beta)
    J, K = _information_matrices(params.a, design._arrays, beta)
    sigma = _sandwich(J, K)
    return np.einsum("ic,ic->c", ifs, np.linalg.solve(sigma, ifs))


def sensitivity_curve(
    params: ModelParams,
    design: StepStressDesign,
    betas,
    kind: str = "self_standardized",
) -> SensitivityCurve:
    """Evaluate :func:`sensitivity` along a grid of tuning parameters."""
    betas = np.asarray(list(betas), dtype=float)
    values = np.array([sensitivity(params, design, b, kind) for b in betas])
    return SensitivityCurve(
        betas=betas,
        values=values,
        kind=kind,
        contamination_cells=np.arange(design.num_cells),
    )
