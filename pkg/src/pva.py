"""
Principal variables analysis on a correlation matrix.

Variables are picked to minimize the trace of the conditional covariance of
the omitted variables given the chosen ones. Conditioning for Student-t and
Laplace latent families uses the covariance at X_j = 0, which is the
Gaussian Schur complement times a constant factor per conditioning step.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .corrkit import (
    DEFAULT_PD_FLOOR,
    SYMMETRY_TOL,
    CorrelationFamily,
    CorrelationMatrix,
    is_positive_definite,
    repair_pd,
)
from .errors import InputError, NumericalError, SelectionError

logger = logging.getLogger("pva.core")

PIVOT_TOL = 1e-12
CONDITION_LIMIT = 1e12
EXHAUSTIVE_LIMIT = 10**6
TIE_TOL = 1e-12
ITERATED_CONDITIONING = "iterated"


# =============================================================================
# LATENT FAMILIES
# =============================================================================

@dataclass(frozen=True)
class LatentFamily:
    """
    Latent distribution tag.

    gaussian                   no parameter
    student_t(nu), nu > 1      conditional-covariance factor nu / (nu - 1)
    laplace(r), r > 0.5        conditional-covariance factor r - 0.5
    """
    tag: str = "gaussian"
    param: Optional[float] = None

    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    LAPLACE = "laplace"

    def __post_init__(self):
        if self.tag == self.GAUSSIAN:
            if self.param is not None:
                raise InputError("gaussian family takes no parameter")
        elif self.tag == self.STUDENT_T:
            if self.param is None or not self.param > 1:
                raise InputError(f"student_t requires nu > 1, got {self.param}")
        elif self.tag == self.LAPLACE:
            if self.param is None or not self.param > 0.5:
                raise InputError(f"laplace requires r > 0.5, got {self.param}")
        else:
            raise InputError(f"unknown latent family: {self.tag}")

    @classmethod
    def gaussian(cls) -> "LatentFamily":
        return cls(cls.GAUSSIAN)

    @classmethod
    def student_t(cls, nu: float) -> "LatentFamily":
        return cls(cls.STUDENT_T, float(nu))

    @classmethod
    def laplace(cls, r: float) -> "LatentFamily":
        return cls(cls.LAPLACE, float(r))

    @classmethod
    def parse(cls, text: str) -> "LatentFamily":
        """Parse the CLI spelling: gaussian | t:NU | laplace:R."""
        name, _, value = str(text).strip().lower().partition(":")
        try:
            if name == cls.GAUSSIAN and not value:
                return cls.gaussian()
            if name in ("t", cls.STUDENT_T) and value:
                return cls.student_t(float(value))
            if name == cls.LAPLACE and value:
                return cls.laplace(float(value))
        except ValueError as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"invalid family parameter in '{text}'")
        raise InputError(f"invalid family '{text}', expected gaussian, t:NU or laplace:R")

    def __str__(self) -> str:
        if self.tag == self.GAUSSIAN:
            return "gaussian"
        prefix = "t" if self.tag == self.STUDENT_T else "laplace"
        return f"{prefix}:{self.param:g}"


def family_factor(family: LatentFamily) -> float:
    """Per-step conditional-covariance scale factor of a latent family."""
    if family.tag == LatentFamily.STUDENT_T:
        return family.param / (family.param - 1.0)
    if family.tag == LatentFamily.LAPLACE:
        return family.param - 0.5
    return 1.0


# =============================================================================
# RESULT TYPE
# =============================================================================

@dataclass
class SelectionResult:
    """
    Ordered picks with the residual-trace trajectory.

    residual_trace[0] is the trace before any pick; residual_trace[k] the trace
    of the conditional covariance after the k-th pick.
    """
    chosen: List[int]
    residual_trace: List[float]
    method: Optional[CorrelationFamily] = None
    family: LatentFamily = field(default_factory=LatentFamily.gaussian)
    repaired: bool = False
    conditioning: str = ITERATED_CONDITIONING

    @property
    def q(self) -> int:
        return len(self.chosen)

    @property
    def final_trace(self) -> float:
        return self.residual_trace[-1]


def selection_report(result: SelectionResult, names: Optional[Sequence[str]] = None) -> List[Dict]:
    """Ranked rows: rank, index, name, residual trace after the pick."""
    rows = []
    for rank, index in enumerate(result.chosen, start=1):
        rows.append({
            "rank": rank,
            "index": index,
            "name": names[index] if names is not None else f"V{index}",
            "residual_trace": result.residual_trace[rank],
        })
    return rows


# =============================================================================
# CONDITIONAL COVARIANCE
# =============================================================================

def _as_square(sigma) -> np.ndarray:
    if isinstance(sigma, CorrelationMatrix):
        sigma = sigma.values
    m = np.asarray(sigma, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"covariance matrix must be square, got shape {m.shape}")
    if np.any(np.isnan(m)):
        raise InputError("covariance matrix contains NaN")
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
        raise InputError("covariance matrix is not symmetric")
    return m


def _subset(indices, p: int) -> List[int]:
    s = [int(i) for i in indices]
    if len(set(s)) != len(s):
        raise InputError(f"subset has repeated indices: {s}")
    for i in s:
        if not 0 <= i < p:
            raise InputError(f"index {i} out of range for p = {p}")
    return s


def cond_cov_single(sigma, j: int, family: LatentFamily = LatentFamily.gaussian()) -> np.ndarray:
    """c(family) * (Sigma_-j - Sigma_-j,j Sigma_-j,j^T / sigma_j^2), rows in ascending index order."""
    m = _as_square(sigma)
    p = m.shape[0]
    if p < 2:
        raise InputError("conditioning needs p >= 2")
    (j,) = _subset([j], p)
    pivot = m[j, j]
    if pivot <= PIVOT_TOL:
        raise NumericalError(f"degenerate pivot at index {j} (variance {pivot:.3g})")
    rest = [i for i in range(p) if i != j]
    s = m[rest, j]
    out = m[np.ix_(rest, rest)] - np.outer(s, s) / pivot
    return family_factor(family) * (out + out.T) / 2.0


def cond_cov_subset(sigma, subset, family: LatentFamily = LatentFamily.gaussian()) -> np.ndarray:
    """
    c(family)^|S| * (Sigma_22 - Sigma_21 Sigma_11^-1 Sigma_12) for the complement of S,
    rows in ascending index order.
    """
    m = _as_square(sigma)
    p = m.shape[0]
    s = _subset(subset, p)
    if not s:
        raise InputError("conditioning subset is empty")
    if len(s) >= p:
        raise InputError(f"conditioning subset must leave at least one variable (|S| = {len(s)}, p = {p})")
    rest = [i for i in range(p) if i not in set(s)]

    s11 = m[np.ix_(s, s)]
    if np.linalg.cond(s11) > CONDITION_LIMIT:
        raise NumericalError(f"conditioning block for {s} is numerically singular")
    s21 = m[np.ix_(rest, s)]
    try:
        solved = cho_solve(cho_factor(s11, lower=True), s21.T)
    except LinAlgError:
        raise NumericalError(f"conditioning block for {s} is not positive definite")
    out = m[np.ix_(rest, rest)] - s21 @ solved
    return family_factor(family) ** len(s) * (out + out.T) / 2.0


# =============================================================================
# SELECTION
# =============================================================================

def _prepare(sigma, floor: float):
    """Validate and, if needed, PD-repair the input. Returns (matrix, repaired)."""
    m = _as_square(sigma)
    if is_positive_definite(m, floor):
        return m, False
    repaired = repair_pd(m, floor=floor)
    return repaired.values, True


def _check_q(q: int, p: int):
    if not 1 <= q < p:
        raise SelectionError(f"q must satisfy 1 <= q < p = {p}, got {q}")


def _greedy_path(m: np.ndarray, q: int, family: LatentFamily, allowed=None):
    """
    Run the greedy conditioning loop on m.

    Candidate traces use tr(Sigma_-j|j) = c * (tr(Sigma) - |Sigma[:, j]|^2 / Sigma_jj).
    Ties go to the lowest original index. When allowed is given, only those
    indices may be picked.
    """
    c = family_factor(family)
    current = m.copy()
    remaining = list(range(m.shape[0]))
    chosen: List[int] = []
    traces = [float(np.trace(current))]

    for _ in range(q):
        diag = np.diag(current)
        if np.any(diag <= PIVOT_TOL):
            j = remaining[int(np.argmin(diag))]
            raise NumericalError(f"degenerate pivot at index {j}")
        candidates = c * (np.trace(current) - np.einsum("ij,ij->j", current, current) / diag)
        if allowed is not None:
            mask = np.array([idx in allowed for idx in remaining])
            candidates = np.where(mask, candidates, np.inf)
        best = candidates.min()
        tied = np.flatnonzero(candidates <= best + TIE_TOL * max(1.0, abs(best)))
        pos = int(tied[0])

        chosen.append(remaining[pos])
        current = cond_cov_single(current, pos, family)
        remaining.pop(pos)
        traces.append(float(np.trace(current)))
    return chosen, traces


def greedy_select(
    sigma: Union[CorrelationMatrix, np.ndarray],
    q: int,
    family: LatentFamily = LatentFamily.gaussian(),
    floor: float = DEFAULT_PD_FLOOR,
) -> SelectionResult:
    """
    Greedy PVA: repeatedly condition on the variable leaving the smallest
    residual trace. Non-PD input is repaired first (recorded in the result).
    """
    method = sigma.family if isinstance(sigma, CorrelationMatrix) else None
    already_repaired = isinstance(sigma, CorrelationMatrix) and sigma.repaired
    m, repaired = _prepare(sigma, floor)
    _check_q(q, m.shape[0])

    chosen, traces = _greedy_path(m, q, family)
    logger.debug("Greedy picks %s, residual traces %s", chosen, traces)
    return SelectionResult(
        chosen=chosen, residual_trace=traces, method=method, family=family,
        repaired=repaired or already_repaired,
    )


def exhaustive_select(
    sigma: Union[CorrelationMatrix, np.ndarray],
    q: int,
    family: LatentFamily = LatentFamily.gaussian(),
) -> SelectionResult:
    """
    Best subset of size q by full enumeration, lexicographic tie-break.
    The chosen indices are reported in greedy order of marginal contribution.
    """
    method = sigma.family if isinstance(sigma, CorrelationMatrix) else None
    m = _as_square(sigma)
    p = m.shape[0]
    _check_q(q, p)
    count = math.comb(p, q)
    if count > EXHAUSTIVE_LIMIT:
        raise SelectionError(
            f"exhaustive search over C({p}, {q}) = {count} subsets exceeds {EXHAUSTIVE_LIMIT}; "
            "use greedy_select"
        )
    if np.linalg.eigvalsh(m)[0] <= 0:
        raise NumericalError("exhaustive search needs a positive definite matrix; run repair_pd first")

    best_subset, best_trace = None, np.inf
    for subset in itertools.combinations(range(p), q):
        trace = float(np.trace(cond_cov_subset(m, subset)))
        if best_subset is None or trace < best_trace - TIE_TOL * max(1.0, abs(best_trace)):
            best_subset, best_trace = subset, trace

    chosen, traces = _greedy_path(m, q, family, allowed=set(best_subset))
    return SelectionResult(chosen=chosen, residual_trace=traces, method=method, family=family)


def ree(
    sigma: Union[CorrelationMatrix, np.ndarray],
    subset,
    reference,
    family: LatentFamily = LatentFamily.gaussian(),
) -> float:
    """
    Relative explanatory efficiency tr(Cov(X | X_ref)) / tr(Cov(X | X_subset)).
    Values above 1 favor subset over reference.
    """
    p = _as_square(sigma).shape[0]
    subset = _subset(subset, p)
    reference = _subset(reference, p)
    if len(subset) != len(reference):
        raise InputError(f"subset sizes differ: {len(subset)} vs {len(reference)}")
    if sorted(subset) == sorted(reference):
        return 1.0
    num = float(np.trace(cond_cov_subset(sigma, reference, family)))
    den = float(np.trace(cond_cov_subset(sigma, subset, family)))
    return num / den
