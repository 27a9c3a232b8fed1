"""
Selection pipeline for real datasets.
load -> estimate -> repair -> greedy_select, for one method or all admissible ones.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .corrkit import DEFAULT_PD_FLOOR, CorrelationFamily, CorrelationMatrix, repair_pd
from .dataio import DEFAULT_MAX_LEVELS, Dataset, load_dataset, load_schema
from .errors import SchemaError
from .estimators import get_estimator
from .pva import LatentFamily, SelectionResult, greedy_select

logger = logging.getLogger("pva.pipeline")


@dataclass
class PipelineOutput:
    """Estimated matrix and the selection made on it."""
    method: CorrelationFamily
    matrix: CorrelationMatrix
    selection: SelectionResult


class SelectionPipeline:
    """
    Runs PVA on a dataset with one correlation family.

    Steps:
        1. estimate the correlation matrix
        2. repair it to the PD floor if needed
        3. greedily pick q variables
    """

    def __init__(
        self,
        method: CorrelationFamily = CorrelationFamily.COPULA,
        q: int = 10,
        family: LatentFamily = LatentFamily.gaussian(),
        pd_floor: float = DEFAULT_PD_FLOOR,
        max_levels: int = DEFAULT_MAX_LEVELS,
        continuous_margin: str = "normal",
    ):
        self.method = CorrelationFamily(method)
        self.q = q
        self.family = family
        self.pd_floor = pd_floor
        self.max_levels = max_levels
        self.continuous_margin = continuous_margin

    def _estimator(self, method: CorrelationFamily):
        if method is CorrelationFamily.POLYCHORIC:
            return get_estimator(method, floor=self.pd_floor, continuous_margin=self.continuous_margin)
        return get_estimator(method)

    def estimate(self, dataset: Dataset, method: Optional[CorrelationFamily] = None) -> CorrelationMatrix:
        """Estimate and repair the correlation matrix of a dataset."""
        method = CorrelationFamily(method or self.method)
        estimator = self._estimator(method)
        if not estimator.admissible(dataset.schema):
            raise SchemaError(f"{method.value} requires at least one ordinal column")
        matrix = estimator.estimate(dataset.matrix, dataset.schema, dataset.names)
        if not matrix.repaired:
            matrix = repair_pd(matrix, floor=self.pd_floor)
        return matrix

    def run(self, dataset: Dataset, method: Optional[CorrelationFamily] = None) -> PipelineOutput:
        """Estimate, repair and select on an in-memory dataset."""
        method = CorrelationFamily(method or self.method)
        logger.info("[1/2] Estimating %s correlation (n=%d, p=%d)", method.value, dataset.n, dataset.p)
        matrix = self.estimate(dataset, method)

        logger.info("[2/2] Selecting %d of %d variables", self.q, dataset.p)
        selection = greedy_select(matrix, self.q, self.family, floor=self.pd_floor)
        logger.debug("Picks: %s", [dataset.names[i] for i in selection.chosen])
        return PipelineOutput(method=method, matrix=matrix, selection=selection)

    def run_from_file(
        self, path: str, schema_path: Optional[str] = None, method: Optional[CorrelationFamily] = None,
    ) -> Tuple[Dataset, PipelineOutput]:
        """Load a CSV (and optional schema file) and run the pipeline."""
        dataset = self.load(path, schema_path)
        return dataset, self.run(dataset, method)

    def load(self, path: str, schema_path: Optional[str] = None) -> Dataset:
        schema = load_schema(schema_path) if schema_path else None
        return load_dataset(path, schema=schema, max_levels=self.max_levels)

    def admissible_methods(self, dataset: Dataset) -> List[CorrelationFamily]:
        return [m for m in CorrelationFamily if self._estimator(m).admissible(dataset.schema)]

    def run_all_methods(self, dataset: Dataset) -> Dict[CorrelationFamily, PipelineOutput]:
        """Every admissible family, in declaration order."""
        outputs = {}
        methods = self.admissible_methods(dataset)
        for k, method in enumerate(methods, start=1):
            logger.info("[%d/%d] method %s", k, len(methods), method.value)
            outputs[method] = self.run(dataset, method)
        return outputs
