"""
Correlation estimation for generalized PVA.
Pearson, Spearman and Gaussian-copula matrices, contingency tables for
ordinal pairs, and positive-definite repair by eigenvalue clipping.

Polychoric / polyserial estimation lives in src/polychoric.py and the
bivariate normal kernel in src/bvn.py.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import (
    DegenerateColumnError,
    InputError,
    MissingValueError,
    column_label,
)

logger = logging.getLogger("pva.corrkit")

DEFAULT_PD_FLOOR = 1e-8
SYMMETRY_TOL = 1e-9
# a matrix repaired to the floor may land a rounding error below it
FLOOR_RTOL = 1e-6


# =============================================================================
# DOMAIN TYPES
# =============================================================================

class CorrelationFamily(str, Enum):
    """Correlation family used to build a matrix. Values double as CLI names."""
    PEARSON = "pearson"
    SPEARMAN = "spearman"
    COPULA = "copula"
    POLYCHORIC = "polychoric"


@dataclass(frozen=True)
class VariableKind:
    """Continuous, or ordinal with a count of ordered levels."""
    kind: str
    levels: Optional[int] = None

    CONTINUOUS = "continuous"
    ORDINAL = "ordinal"

    def __post_init__(self):
        if self.kind == self.CONTINUOUS:
            if self.levels is not None:
                raise InputError("continuous variables carry no level count")
        elif self.kind == self.ORDINAL:
            if self.levels is None or self.levels < 2:
                raise InputError(f"ordinal variables need at least 2 levels, got {self.levels}")
        else:
            raise InputError(f"unknown variable kind: {self.kind}")

    @classmethod
    def continuous(cls) -> "VariableKind":
        return cls(cls.CONTINUOUS)

    @classmethod
    def ordinal(cls, levels: int) -> "VariableKind":
        return cls(cls.ORDINAL, int(levels))

    @property
    def is_ordinal(self) -> bool:
        return self.kind == self.ORDINAL

    def __str__(self) -> str:
        return f"ordinal:{self.levels}" if self.is_ordinal else "continuous"


@dataclass
class CorrelationMatrix:
    """
    A p x p correlation matrix with its provenance.

    family is None for population matrices (e.g. a sampled ground-truth Sigma).
    boundary_pairs lists (i, j) pairs whose pairwise estimate hit the rho clamp.
    """
    values: np.ndarray
    family: Optional[CorrelationFamily] = None
    repaired: bool = False
    boundary_pairs: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise InputError(f"correlation matrix must be square, got shape {self.values.shape}")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values)[0])


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulated counts of two ordinal columns, levels ascending."""
    counts: np.ndarray
    row_levels: np.ndarray
    col_levels: np.ndarray

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise InputError("contingency counts must be nonnegative")
        if self.counts.shape != (len(self.row_levels), len(self.col_levels)):
            raise InputError("contingency table shape does not match its level labels")

    @property
    def n(self) -> int:
        return int(self.counts.sum())


# =============================================================================
# INPUT VALIDATION
# =============================================================================

def as_data_matrix(data, min_rows: int = 1) -> np.ndarray:
    """Coerce to a 2-D float array and reject missing or infinite cells."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"data must be a 2-D matrix, got {arr.ndim} dimensions")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError("empty input")
    if arr.shape[0] < min_rows:
        raise InputError(f"need at least {min_rows} observations, got {arr.shape[0]}")
    missing = np.argwhere(np.isnan(arr))
    if missing.size:
        row, col = (int(v) for v in missing[0])
        raise MissingValueError(
            f"missing value at row {row + 1}, column {col}", row=row + 1, column=str(col)
        )
    infinite = np.argwhere(~np.isfinite(arr))
    if infinite.size:
        row, col = (int(v) for v in infinite[0])
        raise InputError(f"non-finite value at row {row + 1}, column {col}")
    return arr


def as_column(column) -> np.ndarray:
    """Coerce to a 1-D float vector and reject missing or infinite values."""
    arr = np.asarray(column, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("empty input")
    if np.any(np.isnan(arr)):
        raise MissingValueError("missing value in column")
    if not np.all(np.isfinite(arr)):
        raise InputError("non-finite value in column")
    return arr


# =============================================================================
# RANKS AND SCORES
# =============================================================================

def ranks_average_ties(column) -> np.ndarray:
    """Ranks 1..n; tied values share the mean of the ranks they occupy."""
    return rankdata(as_column(column), method="average")


def copula_scores(column) -> np.ndarray:
    """Normal scores Phi^-1(Rank / (n + 1)) with average-tie ranks."""
    x = as_column(column)
    if x.size < 2:
        raise InputError(f"copula scores need at least 2 observations, got {x.size}")
    return ndtri(rankdata(x, method="average") / (x.size + 1))


def pearson_from_scores(scores: np.ndarray, names: Optional[Sequence[str]] = None) -> np.ndarray:
    """
    Sample Pearson correlation of the columns of a prepared score matrix.
    A column with no spread is reported by name.
    """
    n, p = scores.shape
    if n < 2:
        raise InputError(f"need at least 2 observations, got {n}")
    flat = np.flatnonzero(np.ptp(scores, axis=0) == 0)
    if flat.size:
        raise DegenerateColumnError("column has zero variance", column=column_label(int(flat[0]), names))

    centered = scores - scores.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    corr = (centered.T @ centered) / np.sqrt(np.outer(ss, ss))
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


# =============================================================================
# ESTIMATORS
# =============================================================================

def pearson_corr(data, names: Optional[Sequence[str]] = None) -> CorrelationMatrix:
    """Sample Pearson correlation matrix."""
    x = as_data_matrix(data, min_rows=2)
    return CorrelationMatrix(pearson_from_scores(x, names), family=CorrelationFamily.PEARSON)


def spearman_corr(data, names: Optional[Sequence[str]] = None) -> CorrelationMatrix:
    """Spearman correlation: Pearson correlation of average-tie ranks."""
    x = as_data_matrix(data, min_rows=2)
    ranks = np.column_stack([rankdata(x[:, j], method="average") for j in range(x.shape[1])])
    return CorrelationMatrix(pearson_from_scores(ranks, names), family=CorrelationFamily.SPEARMAN)


def gaussian_copula_corr(data, names: Optional[Sequence[str]] = None) -> CorrelationMatrix:
    """Gaussian copula correlation with the empirical-CDF (nonparametric) margins."""
    x = as_data_matrix(data, min_rows=2)
    scores = np.column_stack([copula_scores(x[:, j]) for j in range(x.shape[1])])
    return CorrelationMatrix(pearson_from_scores(scores, names), family=CorrelationFamily.COPULA)


def contingency_table(x, y) -> ContingencyTable:
    """Cross-tabulate two ordinal code vectors."""
    x = as_column(x)
    y = as_column(y)
    if x.size != y.size:
        raise InputError(f"columns differ in length: {x.size} vs {y.size}")
    row_levels, row_idx = np.unique(x, return_inverse=True)
    col_levels, col_idx = np.unique(y, return_inverse=True)
    counts = np.zeros((row_levels.size, col_levels.size), dtype=np.int64)
    np.add.at(counts, (row_idx, col_idx), 1)
    return ContingencyTable(counts=counts, row_levels=row_levels, col_levels=col_levels)


# =============================================================================
# POSITIVE-DEFINITE REPAIR
# =============================================================================

def is_positive_definite(matrix, floor: float = 0.0) -> bool:
    """
    Cholesky test: True when the symmetric part minus floor * I factors.

    The floor is relaxed by FLOOR_RTOL so repaired matrices pass unchanged.
    """
    m = np.asarray(matrix, dtype=float)
    shifted = (m + m.T) / 2.0 - floor * (1.0 - FLOOR_RTOL) * np.eye(m.shape[0])
    try:
        np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError:
        return False
    return True


def repair_pd(
    matrix: Union[CorrelationMatrix, np.ndarray],
    floor: float = DEFAULT_PD_FLOOR,
    family: Optional[CorrelationFamily] = None,
) -> CorrelationMatrix:
    """
    Clip eigenvalues below floor, reconstruct, and rescale to unit diagonal.

    PD inputs (smallest eigenvalue >= floor) come back unchanged with
    repaired=False. If rescaling pulls the smallest eigenvalue back under the
    floor, the result is blended with the identity just enough to restore it;
    the blend keeps the unit diagonal.
    """
    if isinstance(matrix, CorrelationMatrix):
        values = matrix.values
        family = family or matrix.family
        boundary = list(matrix.boundary_pairs)
    else:
        values = np.asarray(matrix, dtype=float)
        boundary = []
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InputError(f"matrix must be square, got shape {values.shape}")
    if floor <= 0 or floor >= 1:
        raise InputError(f"PD floor must lie in (0, 1), got {floor}")
    if np.max(np.abs(values - values.T)) > SYMMETRY_TOL:
        raise InputError("matrix is not symmetric")

    sym = (values + values.T) / 2.0
    if is_positive_definite(sym, floor):
        return CorrelationMatrix(sym.copy(), family=family, repaired=False, boundary_pairs=boundary)

    eigvals, eigvecs = np.linalg.eigh(sym)
    clipped = np.maximum(eigvals, floor)
    rebuilt = (eigvecs * clipped) @ eigvecs.T
    d = np.sqrt(np.diag(rebuilt))
    rebuilt = rebuilt / np.outer(d, d)
    rebuilt = (rebuilt + rebuilt.T) / 2.0
    np.fill_diagonal(rebuilt, 1.0)

    smallest = np.linalg.eigvalsh(rebuilt)[0]
    if smallest < floor:
        # (1 - a) R + a I has eigenvalues (1 - a) lambda + a
        alpha = (floor - smallest) / (1.0 - smallest)
        rebuilt = (1.0 - alpha) * rebuilt + alpha * np.eye(rebuilt.shape[0])
        np.fill_diagonal(rebuilt, 1.0)

    logger.warning(
        "Repaired non-PD %s matrix: smallest eigenvalue %.3g raised to floor %.1g",
        family.value if family else "correlation", eigvals[0], floor,
    )
    return CorrelationMatrix(
        np.clip(rebuilt, -1.0, 1.0), family=family, repaired=True, boundary_pairs=boundary
    )
