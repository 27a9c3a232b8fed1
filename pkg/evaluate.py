#!/usr/bin/env python3
"""
Evaluation harness for generalized PVA.
Runs the scaled-down figure scenarios and checks the expected trends.
"""

import json
import logging
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from src.corrkit import CorrelationFamily
from src.presets import DEFAULT_REPLICATES, HEAVY_TAILED, N_GRID, n_grid_scenarios, q_grid_scenarios
from src.simgen import ScenarioResult, Transform, run_grid

logger = logging.getLogger("pva.evaluate")

LARGE_N = N_GRID[-1]
PEARSON = CorrelationFamily.PEARSON
SPEARMAN = CorrelationFamily.SPEARMAN
COPULA = CorrelationFamily.COPULA
POLYCHORIC = CorrelationFamily.POLYCHORIC


@dataclass
class CriterionCheck:
    """Outcome of one trend criterion."""
    criterion: str
    passed: bool
    detail: str
    known_failure: bool = False

    def to_dict(self) -> Dict:
        return asdict(self)


def _summary(result: ScenarioResult, method: CorrelationFamily):
    for summary in result.summaries:
        if summary.method is method:
            return summary
    raise KeyError(method)


def _by_transform(results: List[ScenarioResult], n: int) -> Dict[Transform, ScenarioResult]:
    return {r.scenario.transform: r for r in results if r.scenario.n == n}


def check_proportions(results: List[ScenarioResult]) -> List[CriterionCheck]:
    """Mean proportion of ideal variables recovered at the largest n."""
    at = _by_transform(results, LARGE_N)
    checks = []

    none = {m: _summary(at[Transform.NONE], m).proportion_ideal_mean for m in (PEARSON, SPEARMAN, COPULA)}
    checks.append(CriterionCheck(
        "untransformed recovery",
        none[PEARSON] >= 0.9 and none[COPULA] >= 0.9
        and abs(none[PEARSON] - none[COPULA]) <= 0.05
        and abs(none[SPEARMAN] - none[PEARSON]) <= 0.1,
        f"pearson={none[PEARSON]:.3f} spearman={none[SPEARMAN]:.3f} copula={none[COPULA]:.3f}",
    ))

    cont = {m: _summary(at[Transform.CONTINUOUS], m).proportion_ideal_mean for m in (PEARSON, SPEARMAN, COPULA)}
    checks.append(CriterionCheck(
        "continuous transforms: rank methods beat pearson",
        cont[PEARSON] < 0.65 and cont[SPEARMAN] >= 0.8 and cont[COPULA] >= 0.8,
        f"pearson={cont[PEARSON]:.3f} spearman={cont[SPEARMAN]:.3f} copula={cont[COPULA]:.3f}",
        # the capped maps tie the top 40% of two columns, holding rank methods near 0.75
        known_failure=True,
    ))

    ordn = {
        m: _summary(at[Transform.ORDINAL], m).proportion_ideal_mean
        for m in (PEARSON, SPEARMAN, COPULA, POLYCHORIC)
    }
    margin = min(ordn[POLYCHORIC] - ordn[m] for m in (PEARSON, SPEARMAN, COPULA))
    checks.append(CriterionCheck(
        "ordinal transforms: polychoric best by 0.15",
        margin >= 0.15,
        " ".join(f"{m.value}={v:.3f}" for m, v in ordn.items()),
    ))
    return checks


def check_efficiency(results: List[ScenarioResult]) -> List[CriterionCheck]:
    """REE of the estimated selections at the largest n under continuous transforms."""
    cont = _by_transform(results, LARGE_N)[Transform.CONTINUOUS]
    values = {m: _summary(cont, m).ree_mean for m in (PEARSON, SPEARMAN, COPULA)}
    return [CriterionCheck(
        "continuous transforms: efficiency plateau",
        0.93 <= values[PEARSON] <= 0.99 and values[SPEARMAN] >= 0.99 and values[COPULA] >= 0.99,
        " ".join(f"{m.value}={v:.4f}" for m, v in values.items()),
    )]


def check_q_grid(results: List[ScenarioResult]) -> List[CriterionCheck]:
    """Polychoric dominance and REE decreasing in q, per latent family."""
    checks = []
    panels: Dict[str, List[ScenarioResult]] = {}
    for r in results:
        if r.scenario.transform is Transform.ORDINAL:
            panels.setdefault(r.scenario.latent, []).append(r)

    for latent, panel in panels.items():
        panel.sort(key=lambda r: r.scenario.q)
        losses = [
            f"q={r.scenario.q}:{s.method.value}"
            for r in panel for s in r.summaries
            if s.method is not POLYCHORIC and s.ree_mean >= _summary(r, POLYCHORIC).ree_mean
        ]
        rises = []
        for prev, cur in zip(panel, panel[1:]):
            for method in cur.scenario.methods:
                a, b = _summary(prev, method), _summary(cur, method)
                if b.ree_mean > a.ree_mean + 2.0 * max(a.ree_stderr, b.ree_stderr):
                    rises.append(f"{method.value}@q={cur.scenario.q}")
        checks.append(CriterionCheck(
            f"q grid [{latent}]: polychoric dominates, REE nonincreasing",
            not losses and not rises,
            f"losses={losses or 'none'} rises={rises or 'none'}",
        ))
    return checks


def save_metrics_json(checks: List[CriterionCheck], results: List[ScenarioResult], output_path: Path):
    data = {
        "generated_at": datetime.now().isoformat(),
        "passed": sum(c.passed for c in checks),
        "total": len(checks),
        "checks": [c.to_dict() for c in checks],
        "scenarios": [r.model_dump(mode="json") for r in results],
    }
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)


def run_evaluation(
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 7,
    workers: int = 1,
    output_dir: str = "./eval_results",
    full_grid: bool = False,
) -> Dict:
    """
    Run the trend checks.

    Args:
        replicates: Replicates per scenario
        seed: Master seed
        workers: Replicate threads
        output_dir: Directory for the metrics JSON
        full_grid: Run every n of the sample-size grid instead of the largest only

    Returns:
        Evaluation summary
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    n_grid = N_GRID if full_grid else (LARGE_N,)
    logger.info("[1/2] Sample-size grid n=%s, %d replicates", list(n_grid), replicates)
    n_results = run_grid(n_grid_scenarios("gaussian", replicates, seed, n_grid=n_grid), workers=workers)

    logger.info("[2/2] Selection-size grid, ordinal transforms")
    q_scenarios = [
        s for s in q_grid_scenarios(("gaussian",) + HEAVY_TAILED, replicates, seed)
        if s.transform is Transform.ORDINAL
    ]
    q_results = run_grid(q_scenarios, workers=workers)

    checks = check_proportions(n_results) + check_efficiency(n_results) + check_q_grid(q_results)

    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    metrics_path = output_dir / f"metrics_{timestamp}.json"
    save_metrics_json(checks, n_results + q_results, metrics_path)

    print("\n" + "=" * 60)
    print("EVALUATION SUMMARY")
    print("=" * 60)
    for check in checks:
        status = "PASS" if check.passed else ("FAIL, known" if check.known_failure else "FAIL")
        print(f"  [{status}] {check.criterion}")
        print(f"         {check.detail}")
    print(f"\nPassed {sum(c.passed for c in checks)}/{len(checks)}")
    print(f"Metrics saved to: {metrics_path}")

    return {
        "passed": sum(c.passed for c in checks),
        "total": len(checks),
        "metrics_file": str(metrics_path),
    }


# =============================================================================
# CLI INTERFACE
# =============================================================================

if __name__ == "__main__":
    import argparse
    import sys

    parser = argparse.ArgumentParser(description="Check simulation trends of generalized PVA")
    parser.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES, help="Replicates per scenario")
    parser.add_argument("--seed", type=int, default=7, help="Master seed")
    parser.add_argument("--workers", type=int, default=1, help="Replicate threads")
    parser.add_argument("--output", "-o", default="./eval_results", help="Output directory")
    parser.add_argument("--full-grid", action="store_true", help="Run the whole sample-size grid")
    parser.add_argument("--quiet", "-q", action="store_true", help="Warnings only")
    args = parser.parse_args()

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    summary = run_evaluation(
        replicates=args.replicates,
        seed=args.seed,
        workers=args.workers,
        output_dir=args.output,
        full_grid=args.full_grid,
    )
    sys.exit(0 if summary["passed"] == summary["total"] else 1)
