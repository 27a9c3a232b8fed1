"""
Monte Carlo scenarios for generalized PVA.

Each replicate samples a Wishart-derived correlation matrix, finds the ideal
set by PVA on it, draws latent data, applies a monotone transformation suite,
re-estimates correlations from the observed data and scores the selections
against the ideal set.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import gamma as gamma_dist
from scipy.stats import pareto as pareto_dist

from .corrkit import (
    CorrelationFamily,
    CorrelationMatrix,
    VariableKind,
    as_data_matrix,
    ranks_average_ties,
)
from .errors import InputError, NumericalError, PVAError, SimulationError
from .estimators import get_estimator
from .pva import LatentFamily, greedy_select, ree

logger = logging.getLogger("pva.simgen")

EXCLUSION_CEILING = 0.05
WISHART_ATTEMPTS = 10
WISHART_EIG_TOL = 1e-10
TRANSFORM_COUNT = 5

# stream roles within a replicate
SIGMA_STREAM = 0
LATENT_STREAM = 1

METRICS = ("proportion_ideal", "ree")


class Transform(str, Enum):
    NONE = "none"
    CONTINUOUS = "continuous"
    ORDINAL = "ordinal"


class Targets(str, Enum):
    IDEAL_ONLY = "ideal"
    ALL = "all"


# =============================================================================
# SCENARIO MODELS
# =============================================================================

class Scenario(BaseModel):
    """One simulation configuration. The latent family uses the CLI spelling."""
    model_config = ConfigDict(frozen=True)

    p: int = Field(10, ge=2)
    q: int = Field(5, ge=1)
    n: int = Field(..., ge=2)
    latent: str = "gaussian"
    transform: Transform = Transform.NONE
    targets: Targets = Targets.IDEAL_ONLY
    methods: Tuple[CorrelationFamily, ...] = (
        CorrelationFamily.PEARSON,
        CorrelationFamily.SPEARMAN,
        CorrelationFamily.COPULA,
    )
    replicates: int = Field(200, ge=1)
    seed: int = Field(..., ge=0, lt=2**64)

    @field_validator("latent")
    @classmethod
    def _canonical_latent(cls, value: str) -> str:
        return str(LatentFamily.parse(value))

    @model_validator(mode="after")
    def _check_consistency(self) -> "Scenario":
        if self.q >= self.p:
            raise ValueError(f"q must be smaller than p (q = {self.q}, p = {self.p})")
        if not self.methods:
            raise ValueError("at least one correlation method is required")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        if CorrelationFamily.POLYCHORIC in self.methods and self.transform is not Transform.ORDINAL:
            raise ValueError("the polychoric method needs the ordinal transform")
        if (
            self.transform is not Transform.NONE
            and self.targets is Targets.IDEAL_ONLY
            and self.q > TRANSFORM_COUNT
        ):
            raise ValueError(f"ideal-only transforms cover at most {TRANSFORM_COUNT} variables")
        return self

    @property
    def family(self) -> LatentFamily:
        return LatentFamily.parse(self.latent)


class MethodSummary(BaseModel):
    """Aggregated metrics of one correlation method in one scenario."""
    method: CorrelationFamily
    proportion_ideal_mean: float
    proportion_ideal_stderr: float
    ree_mean: float
    ree_stderr: float


class ScenarioResult(BaseModel):
    """Per-method means and standard errors over the retained replicates."""
    scenario: Scenario
    summaries: List[MethodSummary]
    replicates: int
    excluded: int = 0

    def tidy_rows(self, metrics: Sequence[str] = METRICS) -> List[Dict]:
        """One row per method x metric."""
        family = self.scenario.family
        rows = []
        for summary in self.summaries:
            for metric in metrics:
                rows.append({
                    "method": summary.method.value,
                    "metric": metric,
                    "mean": getattr(summary, f"{metric}_mean"),
                    "stderr": getattr(summary, f"{metric}_stderr"),
                    "n": self.scenario.n,
                    "q": self.scenario.q,
                    "p": self.scenario.p,
                    "transform": self.scenario.transform.value,
                    "targets": self.scenario.targets.value,
                    "family": family.tag,
                    "family_param": "" if family.param is None else family.param,
                    "replicates": self.replicates,
                    "excluded": self.excluded,
                })
        return rows


# =============================================================================
# SAMPLERS
# =============================================================================

def replicate_rng(seed: int, replicate: int, role: int) -> np.random.Generator:
    """Independent generator keyed by (master seed, replicate index, stream role)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(replicate, role)))


def sample_wishart_corr(p: int, rng: np.random.Generator) -> CorrelationMatrix:
    """Wishart(df = p, scale = I) draw normalized to unit diagonal."""
    if p < 2:
        raise InputError(f"p must be at least 2, got {p}")
    for attempt in range(1, WISHART_ATTEMPTS + 1):
        g = rng.standard_normal((p, p))
        w = g.T @ g
        if np.linalg.eigvalsh(w)[0] > WISHART_EIG_TOL:
            d = np.sqrt(np.diag(w))
            corr = w / np.outer(d, d)
            corr = (corr + corr.T) / 2.0
            np.fill_diagonal(corr, 1.0)
            return CorrelationMatrix(corr)
        logger.warning("Singular Wishart draw (attempt %d/%d), resampling", attempt, WISHART_ATTEMPTS)
    raise NumericalError(f"no usable Wishart draw after {WISHART_ATTEMPTS} attempts")


def sample_latent(
    n: int, sigma: CorrelationMatrix, family: LatentFamily, rng: np.random.Generator,
) -> np.ndarray:
    """
    n rows from MVN(0, Sigma), or its scale mixtures:
    Student-t divides each row by sqrt(chi2_nu / nu), Laplace multiplies it by sqrt(Gamma(r, 1)).
    """
    values = sigma.values if isinstance(sigma, CorrelationMatrix) else np.asarray(sigma, dtype=float)
    try:
        chol = np.linalg.cholesky(values)
    except np.linalg.LinAlgError:
        raise NumericalError("Cholesky factorization failed; repair the matrix first")
    x = rng.standard_normal((n, values.shape[0])) @ chol.T
    if family.tag == LatentFamily.STUDENT_T:
        x = x / np.sqrt(rng.chisquare(family.param, size=n) / family.param)[:, None]
    elif family.tag == LatentFamily.LAPLACE:
        x = x * np.sqrt(rng.gamma(family.param, 1.0, size=n))[:, None]
    return x


# =============================================================================
# TRANSFORMATIONS
# =============================================================================

def ecdf_scaled(column) -> np.ndarray:
    """Average-tie ranks over n + 1, strictly inside (0, 1)."""
    ranks = ranks_average_ties(column)
    return ranks / (ranks.size + 1)


def _capped_square(u):
    return np.minimum(u ** 2, 0.6 ** 2)


def _capped_sixth(u):
    return np.minimum(u ** 6, 0.6 ** 6)


def _gamma_quantile(u):
    return gamma_dist.ppf(u, a=0.5, scale=1.0)


def _pareto_quantile(u):
    return pareto_dist.ppf(u, b=2.0, scale=1.0)


def _exp_jump(u):
    return np.exp(u) * (1.0 + (u > 0.9))


CONTINUOUS_MAPS = (_capped_square, _capped_sixth, _gamma_quantile, _pareto_quantile, _exp_jump)
ORDINAL_CUTS = ((0.2,), (0.4, 0.6), (0.2, 0.3), (0.3, 0.5, 0.7), (0.1, 0.2, 0.3))


def ordinal_level(u, cuts: Sequence[float]) -> np.ndarray:
    """1 + number of cut points strictly below u."""
    u = np.asarray(u, dtype=float)
    return 1.0 + sum((u > c).astype(float) for c in cuts)


def _check_targets(targets, p: int) -> List[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise InputError(f"transform targets repeat: {targets}")
    for t in targets:
        if not 0 <= t < p:
            raise InputError(f"transform target {t} out of range for p = {p}")
    return targets


def transform_continuous(data, targets) -> np.ndarray:
    """
    Apply the five continuous maps to the scaled ECDF of the targeted columns.
    The k-th target gets map k mod 5; untargeted columns pass through.
    """
    x = as_data_matrix(data)
    y = x.copy()
    for position, col in enumerate(_check_targets(targets, x.shape[1])):
        y[:, col] = CONTINUOUS_MAPS[position % TRANSFORM_COUNT](ecdf_scaled(x[:, col]))
    return y


def transform_ordinal(data, targets) -> np.ndarray:
    """Discretize the scaled ECDF of the targeted columns into levels 1, 2, ..."""
    x = as_data_matrix(data)
    y = x.copy()
    for position, col in enumerate(_check_targets(targets, x.shape[1])):
        y[:, col] = ordinal_level(ecdf_scaled(x[:, col]), ORDINAL_CUTS[position % TRANSFORM_COUNT])
    return y


def observed_schema(data: np.ndarray, ordinal_columns: Sequence[int]) -> List[VariableKind]:
    """Schema of transformed data: ordinal targets carry their observed level counts."""
    ordinal_columns = set(ordinal_columns)
    return [
        VariableKind.ordinal(np.unique(data[:, j]).size) if j in ordinal_columns else VariableKind.continuous()
        for j in range(data.shape[1])
    ]


def proportion_ideal(selected, ideal) -> float:
    """Fraction of the ideal set recovered by the selection."""
    selected, ideal = list(selected), list(ideal)
    if len(selected) != len(ideal):
        raise InputError(f"set sizes differ: {len(selected)} vs {len(ideal)}")
    if not ideal:
        raise InputError("empty ideal set")
    return len(set(selected) & set(ideal)) / len(ideal)


# =============================================================================
# RUNNER
# =============================================================================

@dataclass
class ReplicateOutcome:
    index: int
    proportions: Dict[CorrelationFamily, float] = field(default_factory=dict)
    efficiencies: Dict[CorrelationFamily, float] = field(default_factory=dict)
    error: Optional[str] = None


def run_replicate(s: Scenario, index: int) -> ReplicateOutcome:
    """One replicate: sample, transform, estimate, select, score."""
    family = s.family
    outcome = ReplicateOutcome(index=index)
    try:
        sigma = sample_wishart_corr(s.p, replicate_rng(s.seed, index, SIGMA_STREAM))
        ideal = greedy_select(sigma, s.q, family).chosen
        x = sample_latent(s.n, sigma, family, replicate_rng(s.seed, index, LATENT_STREAM))

        targets = ideal if s.targets is Targets.IDEAL_ONLY else list(range(s.p))
        if s.transform is Transform.CONTINUOUS:
            y = transform_continuous(x, targets)
            schema = observed_schema(y, [])
        elif s.transform is Transform.ORDINAL:
            y = transform_ordinal(x, targets)
            schema = observed_schema(y, targets)
        else:
            y = x
            schema = observed_schema(y, [])

        for method in s.methods:
            estimate = get_estimator(method).estimate(y, schema)
            chosen = greedy_select(estimate, s.q, family).chosen
            outcome.proportions[method] = proportion_ideal(chosen, ideal)
            outcome.efficiencies[method] = ree(sigma, chosen, ideal, family)
    except (PVAError, np.linalg.LinAlgError) as exc:
        outcome.error = str(exc)
    return outcome


def _mean_stderr(values: List[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def run_scenario(s: Scenario, workers: int = 1) -> ScenarioResult:
    """
    Run every replicate of a scenario and aggregate in replicate order.
    Failed replicates are excluded; more than 5% exclusions fails the run.
    """
    logger.info(
        "Scenario n=%d q=%d p=%d latent=%s transform=%s targets=%s (%d replicates)",
        s.n, s.q, s.p, s.latent, s.transform.value, s.targets.value, s.replicates,
    )
    indices = range(s.replicates)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda i: run_replicate(s, i), indices))
    else:
        outcomes = [run_replicate(s, i) for i in indices]

    failed = [o for o in outcomes if o.error is not None]
    for o in failed:
        logger.warning("Replicate %d excluded: %s", o.index, o.error)
    if len(failed) > EXCLUSION_CEILING * s.replicates:
        raise SimulationError(
            f"too many failed replicates for n={s.n}, q={s.q}, transform={s.transform.value}",
            excluded=len(failed), total=s.replicates,
        )
    kept = [o for o in outcomes if o.error is None]

    summaries = []
    for method in s.methods:
        prop_mean, prop_se = _mean_stderr([o.proportions[method] for o in kept])
        ree_mean, ree_se = _mean_stderr([o.efficiencies[method] for o in kept])
        summaries.append(MethodSummary(
            method=method,
            proportion_ideal_mean=prop_mean,
            proportion_ideal_stderr=prop_se,
            ree_mean=ree_mean,
            ree_stderr=ree_se,
        ))
    return ScenarioResult(scenario=s, summaries=summaries, replicates=len(kept), excluded=len(failed))


def run_grid(scenarios: Sequence[Scenario], workers: int = 1) -> List[ScenarioResult]:
    """Run scenarios in order."""
    results = []
    for k, s in enumerate(scenarios, start=1):
        logger.info("[%d/%d] running scenario", k, len(scenarios))
        results.append(run_scenario(s, workers=workers))
    return results
