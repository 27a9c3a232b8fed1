"""
CorrelationEstimator abstraction.
Swappable correlation families behind one interface, picked by name.
"""

from abc import ABC, abstractmethod
from typing import Optional, Sequence

from .corrkit import (
    DEFAULT_PD_FLOOR,
    CorrelationFamily,
    CorrelationMatrix,
    VariableKind,
    gaussian_copula_corr,
    pearson_corr,
    spearman_corr,
)
from .errors import InputError, SchemaError
from .polychoric import mixed_corr


class CorrelationEstimator(ABC):
    """Abstract base class for correlation estimators."""

    family: CorrelationFamily

    @abstractmethod
    def estimate(
        self,
        data,
        schema: Optional[Sequence[VariableKind]] = None,
        names: Optional[Sequence[str]] = None,
    ) -> CorrelationMatrix:
        """Estimate a p x p correlation matrix from an n x p data matrix."""
        pass

    def admissible(self, schema: Optional[Sequence[VariableKind]]) -> bool:
        """Whether this estimator can run on data with the given schema."""
        return True


class PearsonEstimator(CorrelationEstimator):
    family = CorrelationFamily.PEARSON

    def estimate(self, data, schema=None, names=None) -> CorrelationMatrix:
        return pearson_corr(data, names)


class SpearmanEstimator(CorrelationEstimator):
    family = CorrelationFamily.SPEARMAN

    def estimate(self, data, schema=None, names=None) -> CorrelationMatrix:
        return spearman_corr(data, names)


class CopulaEstimator(CorrelationEstimator):
    family = CorrelationFamily.COPULA

    def estimate(self, data, schema=None, names=None) -> CorrelationMatrix:
        return gaussian_copula_corr(data, names)


class PolychoricEstimator(CorrelationEstimator):
    """
    Polychoric / polyserial / copula-score assembly.
    Needs a schema with at least one ordinal column.
    """
    family = CorrelationFamily.POLYCHORIC

    def __init__(self, floor: float = DEFAULT_PD_FLOOR, continuous_margin: str = "normal"):
        self.floor = floor
        self.continuous_margin = continuous_margin

    def admissible(self, schema) -> bool:
        return schema is not None and any(kind.is_ordinal for kind in schema)

    def estimate(self, data, schema=None, names=None) -> CorrelationMatrix:
        if not self.admissible(schema):
            raise SchemaError("polychoric requires at least one ordinal column")
        return mixed_corr(
            data, schema, names=names, floor=self.floor, continuous_margin=self.continuous_margin,
        )


def get_estimator(method, **kwargs) -> CorrelationEstimator:
    """
    Factory function to get a correlation estimator.

    Args:
        method: A CorrelationFamily or its name ("pearson", "spearman", "copula", "polychoric")
        **kwargs: Passed to the estimator constructor (polychoric only)

    Examples:
        >>> get_estimator("copula").estimate(data)
        >>> get_estimator("polychoric", floor=1e-6).estimate(data, schema)
    """
    estimators = {
        CorrelationFamily.PEARSON: PearsonEstimator,
        CorrelationFamily.SPEARMAN: SpearmanEstimator,
        CorrelationFamily.COPULA: CopulaEstimator,
        CorrelationFamily.POLYCHORIC: PolychoricEstimator,
    }
    try:
        family = CorrelationFamily(method)
    except ValueError:
        raise InputError(
            f"Unknown correlation method: {method}. "
            f"Available: {[f.value for f in CorrelationFamily]}"
        )
    if family is CorrelationFamily.POLYCHORIC:
        return estimators[family](**kwargs)
    return estimators[family]()
