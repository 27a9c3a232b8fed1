"""
Figure presets: the simulation grids behind each published figure.

Figures 1 and 2 share one grid (both metrics are recorded in every replicate);
the preset only decides which metric rows are emitted.
"""

from dataclasses import dataclass
from typing import List, Tuple

from .corrkit import CorrelationFamily
from .errors import InputError
from .simgen import Scenario, Targets, Transform

DEFAULT_REPLICATES = 200
FULL_SCALE_REPLICATES = 1000

N_GRID = (50, 150, 400, 1200, 3500, 10000)
Q_GRID = (2, 3, 4, 5, 6)
P_DEFAULT = 10
Q_DEFAULT = 5
N_FIXED = 500

HEAVY_TAILED = ("t:2.5", "laplace:3.1")

RANK_METHODS = (CorrelationFamily.PEARSON, CorrelationFamily.SPEARMAN, CorrelationFamily.COPULA)
ORDINAL_METHODS = RANK_METHODS + (CorrelationFamily.POLYCHORIC,)

FIGURES = ("1", "2", "3", "A1", "A2")


@dataclass
class FigurePreset:
    figure_id: str
    scenarios: List[Scenario]
    metrics: Tuple[str, ...]


def methods_for(transform: Transform) -> Tuple[CorrelationFamily, ...]:
    """Correlation families admissible under a transformation suite."""
    return ORDINAL_METHODS if transform is Transform.ORDINAL else RANK_METHODS


def n_grid_scenarios(
    latent: str, replicates: int, seed: int, n_grid=N_GRID, q: int = Q_DEFAULT, p: int = P_DEFAULT,
) -> List[Scenario]:
    """Sample-size sweep with the ideal variables transformed."""
    return [
        Scenario(
            p=p, q=q, n=n, latent=latent, transform=transform, targets=Targets.IDEAL_ONLY,
            methods=methods_for(transform), replicates=replicates, seed=seed,
        )
        for transform in Transform
        for n in n_grid
    ]


def q_grid_scenarios(
    latents, replicates: int, seed: int, q_grid=Q_GRID, n: int = N_FIXED, p: int = P_DEFAULT,
) -> List[Scenario]:
    """Selection-size sweep with every column transformed."""
    return [
        Scenario(
            p=p, q=q, n=n, latent=latent, transform=transform, targets=Targets.ALL,
            methods=methods_for(transform), replicates=replicates, seed=seed,
        )
        for latent in latents
        for transform in Transform
        for q in q_grid
    ]


def figure_scenarios(figure_id: str, replicates: int = DEFAULT_REPLICATES, seed: int = 0) -> FigurePreset:
    """
    Build the scenario grid of a figure.

    1, 2   n in N_GRID, q = 5, p = 10, ideal targets, Gaussian latent
    3      q in 2..6, n = 500, all targets, Gaussian / t(2.5) / Laplace(3.1)
    A1     figure 1/2 grid with t(2.5) latent data
    A2     figure 1/2 grid with Laplace(3.1) latent data
    """
    figure_id = str(figure_id).upper()
    if figure_id == "1":
        return FigurePreset(figure_id, n_grid_scenarios("gaussian", replicates, seed), ("proportion_ideal",))
    if figure_id == "2":
        return FigurePreset(figure_id, n_grid_scenarios("gaussian", replicates, seed), ("ree",))
    if figure_id == "3":
        latents = ("gaussian",) + HEAVY_TAILED
        return FigurePreset(figure_id, q_grid_scenarios(latents, replicates, seed), ("ree",))
    if figure_id == "A1":
        return FigurePreset(figure_id, n_grid_scenarios(HEAVY_TAILED[0], replicates, seed), ("proportion_ideal", "ree"))
    if figure_id == "A2":
        return FigurePreset(figure_id, n_grid_scenarios(HEAVY_TAILED[1], replicates, seed), ("proportion_ideal", "ree"))
    raise InputError(f"unknown figure '{figure_id}', expected one of {', '.join(FIGURES)}")
