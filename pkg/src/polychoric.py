"""
Two-step polychoric and polyserial correlation, and the mixed-type matrix
assembly that dispatches between them.

Thresholds are fixed at Phi^-1 of the cumulative marginal proportions, then
rho alone is found by maximizing the likelihood on [-RHO_BOUND, RHO_BOUND]:
a grid scan locates the best bracket and a bounded Brent search refines it.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .bvn import bvn_cdf
from .corrkit import (
    DEFAULT_PD_FLOOR,
    ContingencyTable,
    CorrelationFamily,
    CorrelationMatrix,
    VariableKind,
    as_column,
    as_data_matrix,
    contingency_table,
    copula_scores,
    pearson_from_scores,
    repair_pd,
)
from .errors import DegenerateColumnError, InputError, column_label

logger = logging.getLogger("pva.polychoric")

RHO_BOUND = 0.999
RHO_TOL = 1e-6
MIN_OBSERVATIONS = 10
POLYCHORIC_GRID_STEP = 0.01
POLYSERIAL_GRID_STEP = 0.05
CONTINUOUS_MARGINS = ("normal", "uniform")

_TINY = np.finfo(float).tiny


@dataclass
class PairEstimate:
    """Result of a pairwise latent-correlation fit."""
    rho: float
    row_thresholds: Optional[np.ndarray]
    col_thresholds: np.ndarray
    loglik: float
    boundary_hit: bool
    n: int


# =============================================================================
# LIKELIHOODS
# =============================================================================

def marginal_thresholds(counts: np.ndarray) -> np.ndarray:
    """Phi^-1 of cumulative marginal proportions, excluding the final 1."""
    cum = np.cumsum(counts)[:-1] / counts.sum()
    return ndtri(cum)


def polychoric_loglik(
    rho: float,
    table: ContingencyTable,
    row_thresholds: np.ndarray,
    col_thresholds: np.ndarray,
) -> float:
    """Multinomial log-likelihood sum n_ij log pi_ij(rho); empty cells add nothing."""
    a = np.concatenate(([-np.inf], row_thresholds, [np.inf]))
    b = np.concatenate(([-np.inf], col_thresholds, [np.inf]))
    grid = bvn_cdf(a[:, None], b[None, :], rho)
    probs = np.diff(np.diff(grid, axis=0), axis=1)
    filled = table.counts > 0
    return float(np.sum(table.counts[filled] * np.log(np.maximum(probs[filled], _TINY))))


def polyserial_loglik(
    rho: float,
    z: np.ndarray,
    level_index: np.ndarray,
    thresholds: np.ndarray,
) -> float:
    """Sum over observations of log P(tau_lower < Y* <= tau_upper | z)."""
    bounds = np.concatenate(([-np.inf], thresholds, [np.inf]))
    scale = np.sqrt(1.0 - rho * rho)
    upper = ndtr((bounds[level_index + 1] - rho * z) / scale)
    lower = ndtr((bounds[level_index] - rho * z) / scale)
    return float(np.sum(np.log(np.maximum(upper - lower, _TINY))))


def maximize_rho(loglik: Callable[[float], float], grid_step: float) -> Tuple[float, float]:
    """
    Maximize a 1-D likelihood over [-RHO_BOUND, RHO_BOUND].

    The grid includes both bounds, so a likelihood still rising at the edge
    returns the bound itself.
    """
    grid = np.unique(np.concatenate((
        np.arange(-0.99, 0.99 + grid_step / 2.0, grid_step),
        [-RHO_BOUND, RHO_BOUND],
    )))
    grid = np.clip(grid, -RHO_BOUND, RHO_BOUND)
    values = np.array([loglik(float(r)) for r in grid])
    best = int(np.argmax(values))
    best_rho, best_value = float(grid[best]), float(values[best])

    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, grid.size - 1)])
    if hi > lo:
        refined = minimize_scalar(
            lambda r: -loglik(r), bounds=(lo, hi), method="bounded",
            options={"xatol": RHO_TOL},
        )
        if refined.success and -refined.fun > best_value:
            best_rho, best_value = float(refined.x), float(-refined.fun)
    return best_rho, best_value


def _boundary(rho: float) -> bool:
    return abs(rho) >= RHO_BOUND - RHO_TOL


def _ordinal_codes(y: np.ndarray, label: str) -> Tuple[np.ndarray, np.ndarray]:
    levels, index = np.unique(y, return_inverse=True)
    if levels.size < 2:
        raise DegenerateColumnError("degenerate ordinal column", column=label)
    return levels, index


# =============================================================================
# PAIRWISE ESTIMATORS
# =============================================================================

def polychoric_pair(x, y, labels: Tuple[str, str] = ("x", "y")) -> PairEstimate:
    """Two-step polychoric correlation of two ordinal columns."""
    x = as_column(x)
    y = as_column(y)
    if x.size != y.size:
        raise InputError(f"columns differ in length: {x.size} vs {y.size}")
    if x.size < MIN_OBSERVATIONS:
        raise InputError(f"polychoric estimation needs at least {MIN_OBSERVATIONS} observations")
    _ordinal_codes(x, labels[0])
    _ordinal_codes(y, labels[1])

    table = contingency_table(x, y)
    row_t = marginal_thresholds(table.counts.sum(axis=1))
    col_t = marginal_thresholds(table.counts.sum(axis=0))
    rho, value = maximize_rho(
        lambda r: polychoric_loglik(r, table, row_t, col_t), POLYCHORIC_GRID_STEP
    )
    return PairEstimate(
        rho=rho, row_thresholds=row_t, col_thresholds=col_t,
        loglik=value, boundary_hit=_boundary(rho), n=table.n,
    )


def continuous_margin_scores(x: np.ndarray, margin: str = "normal") -> np.ndarray:
    """Nonparametric normalization of a continuous column before polyserial fitting."""
    if margin == "normal":
        return copula_scores(x)
    if margin == "uniform":
        u = rankdata(x, method="average") / (x.size + 1)
        return (u - u.mean()) / u.std()
    raise InputError(f"unknown continuous margin '{margin}', expected one of {CONTINUOUS_MARGINS}")


def polyserial_pair(
    x, y, labels: Tuple[str, str] = ("x", "y"), continuous_margin: str = "normal",
) -> PairEstimate:
    """Two-step polyserial correlation of a continuous x and an ordinal y."""
    x = as_column(x)
    y = as_column(y)
    if x.size != y.size:
        raise InputError(f"columns differ in length: {x.size} vs {y.size}")
    if x.size < MIN_OBSERVATIONS:
        raise InputError(f"polyserial estimation needs at least {MIN_OBSERVATIONS} observations")
    if np.unique(x).size < 2:
        raise DegenerateColumnError("continuous column has fewer than 2 distinct values", column=labels[0])
    _, level_index = _ordinal_codes(y, labels[1])

    z = continuous_margin_scores(x, continuous_margin)
    thresholds = marginal_thresholds(np.bincount(level_index))
    rho, value = maximize_rho(
        lambda r: polyserial_loglik(r, z, level_index, thresholds), POLYSERIAL_GRID_STEP
    )
    return PairEstimate(
        rho=rho, row_thresholds=None, col_thresholds=thresholds,
        loglik=value, boundary_hit=_boundary(rho), n=int(x.size),
    )


# =============================================================================
# MATRIX ASSEMBLY
# =============================================================================

def mixed_corr(
    data,
    schema: Sequence[VariableKind],
    names: Optional[Sequence[str]] = None,
    floor: float = DEFAULT_PD_FLOOR,
    continuous_margin: str = "normal",
) -> CorrelationMatrix:
    """
    Latent-Gaussian correlation matrix for mixed continuous/ordinal data.

    continuous/continuous pairs: Pearson correlation of copula scores
    ordinal/ordinal pairs:       polychoric_pair
    mixed pairs:                 polyserial_pair
    The assembled matrix is passed through repair_pd.
    """
    x = as_data_matrix(data, min_rows=2)
    p = x.shape[1]
    if len(schema) != p:
        raise InputError(f"schema has {len(schema)} entries for {p} columns")
    labels = [column_label(j, names) for j in range(p)]

    ordinal = [j for j in range(p) if schema[j].is_ordinal]
    continuous = [j for j in range(p) if not schema[j].is_ordinal]
    for j in ordinal:
        _ordinal_codes(x[:, j], labels[j])
    for j in continuous:
        if np.ptp(x[:, j]) == 0:
            raise DegenerateColumnError("column has zero variance", column=labels[j])

    corr = np.eye(p)
    if continuous:
        scores = np.column_stack([copula_scores(x[:, j]) for j in continuous])
        block = pearson_from_scores(scores, [labels[j] for j in continuous])
        corr[np.ix_(continuous, continuous)] = block

    boundary: List[Tuple[int, int]] = []
    for a_pos, i in enumerate(ordinal):
        for j in ordinal[a_pos + 1:]:
            est = polychoric_pair(x[:, i], x[:, j], labels=(labels[i], labels[j]))
            corr[i, j] = corr[j, i] = est.rho
            if est.boundary_hit:
                boundary.append((min(i, j), max(i, j)))
        for j in continuous:
            est = polyserial_pair(
                x[:, j], x[:, i], labels=(labels[j], labels[i]), continuous_margin=continuous_margin,
            )
            corr[i, j] = corr[j, i] = est.rho
            if est.boundary_hit:
                boundary.append((min(i, j), max(i, j)))

    boundary.sort()
    for i, j in boundary:
        logger.warning("Latent correlation %s ~ %s clamped at the boundary", labels[i], labels[j])

    assembled = CorrelationMatrix(corr, family=CorrelationFamily.POLYCHORIC, boundary_pairs=boundary)
    return repair_pd(assembled, floor=floor)
