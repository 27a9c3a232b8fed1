"""
Command-line interface: corr, select, simulate and ree.

Results go to stdout (or --out); logs and errors go to stderr.
Exit status: 0 success, 2 invalid input or failed validation, 3 I/O failure.
"""

import argparse
import itertools
import logging
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from . import __version__
from .corrkit import DEFAULT_PD_FLOOR, CorrelationFamily
from .dataio import (
    DEFAULT_MAX_LEVELS,
    load_correlation,
    write_correlation,
    write_records,
    write_results,
    write_table1,
)
from .errors import InputError, PVAError
from .pipeline import SelectionPipeline
from .polychoric import CONTINUOUS_MARGINS
from .presets import DEFAULT_REPLICATES, FIGURES, FULL_SCALE_REPLICATES, figure_scenarios, methods_for
from .pva import LatentFamily, cond_cov_subset, ree
from .simgen import METRICS, Scenario, Targets, Transform, run_grid

logger = logging.getLogger("pva.cli")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3

COMMANDS = ("corr", "select", "simulate", "ree")


# =============================================================================
# CONFIGURATION
# =============================================================================

class CommandConfig(BaseModel):
    """Parsed and validated flags of one invocation."""
    command: str
    input: Optional[str] = None
    schema_path: Optional[str] = None
    method: Optional[CorrelationFamily] = None
    methods: Optional[List[CorrelationFamily]] = None
    q: Optional[int] = None
    family: str = "gaussian"
    seed: Optional[int] = None
    replicates: int = DEFAULT_REPLICATES
    full_scale: bool = False
    figure: Optional[str] = None
    out: Optional[str] = None
    json_output: bool = False
    pd_floor: float = DEFAULT_PD_FLOOR
    max_levels: int = DEFAULT_MAX_LEVELS
    continuous_margin: str = "normal"
    all_methods: bool = False
    matrix: Optional[str] = None
    subset: Optional[str] = None
    reference: Optional[str] = None
    n_grid: Optional[List[int]] = None
    q_grid: Optional[List[int]] = None
    p: int = 10
    transform: Transform = Transform.NONE
    targets: Targets = Targets.IDEAL_ONLY
    workers: int = 1

    @field_validator("family")
    @classmethod
    def _family(cls, value: str) -> str:
        return str(LatentFamily.parse(value))

    @field_validator("figure")
    @classmethod
    def _figure(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value.upper() not in FIGURES:
            raise ValueError(f"unknown figure '{value}', expected one of {', '.join(FIGURES)}")
        return value.upper() if value is not None else None

    @model_validator(mode="after")
    def _check_flags(self) -> "CommandConfig":
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command '{self.command}'")
        if not 0 < self.pd_floor < 1:
            raise ValueError(f"--pd-floor must lie in (0, 1), got {self.pd_floor}")
        if self.max_levels < 2:
            raise ValueError(f"--max-levels must be at least 2, got {self.max_levels}")
        if self.continuous_margin not in CONTINUOUS_MARGINS:
            raise ValueError(f"--continuous-margin must be one of {CONTINUOUS_MARGINS}")
        if self.replicates < 1:
            raise ValueError("--replicates must be at least 1")
        if self.workers < 1:
            raise ValueError("--workers must be at least 1")

        if self.command in ("corr", "select") and not self.input:
            raise ValueError(f"{self.command} needs --input")
        if self.command == "select" and self.q is None:
            raise ValueError("select needs --q")
        if self.command == "simulate" and self.seed is None:
            raise ValueError("simulate needs --seed")
        if self.command == "ree":
            if not (self.matrix or self.input):
                raise ValueError("ree needs --matrix or --input")
            if not (self.subset and self.reference):
                raise ValueError("ree needs --subset and --reference")
        return self

    @property
    def fmt(self) -> str:
        return "json" if self.json_output else "csv"

    @property
    def latent(self) -> LatentFamily:
        return LatentFamily.parse(self.family)


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pva",
        description="Generalized principal variables analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", "-o", help="Output path (default: stdout)")
    common.add_argument("--json", dest="json_output", action="store_true", help="Write JSON instead of CSV")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings and errors only")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", "-i", help="CSV dataset with a header row")
    data.add_argument("--schema", dest="schema_path", help="Schema file: name,kind[:levels] per line")
    data.add_argument("--method", "-m", type=CorrelationFamily, choices=list(CorrelationFamily),
                      metavar="{pearson,spearman,copula,polychoric}", help="Correlation family")
    data.add_argument("--pd-floor", type=float, default=DEFAULT_PD_FLOOR, help="Smallest eigenvalue kept")
    data.add_argument("--max-levels", type=int, default=DEFAULT_MAX_LEVELS,
                      help="Most distinct integer values for an inferred ordinal column")
    data.add_argument("--continuous-margin", default="normal", choices=CONTINUOUS_MARGINS,
                      help="Continuous margin used in polyserial pairs")

    family = argparse.ArgumentParser(add_help=False)
    family.add_argument("--family", default="gaussian", help="gaussian | t:NU | laplace:R")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    subparsers.add_parser("corr", parents=[common, data], help="Estimate a correlation matrix")

    select = subparsers.add_parser("select", parents=[common, data, family], help="Rank variables by PVA")
    select.add_argument("--q", type=int, help="Number of variables to pick")
    select.add_argument("--all-methods", action="store_true", help="Side-by-side ranks of every admissible method")

    simulate = subparsers.add_parser("simulate", parents=[common, family], help="Run simulation scenarios")
    simulate.add_argument("--seed", type=int, help="Master seed (required)")
    simulate.add_argument("--figure", help=f"Preset grid: {', '.join(FIGURES)}")
    simulate.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    simulate.add_argument("--full-scale", action="store_true", help=f"Use {FULL_SCALE_REPLICATES} replicates")
    simulate.add_argument("--n", dest="n_grid", type=_int_list, help="Sample sizes, e.g. 50,400,10000")
    simulate.add_argument("--q", type=int, help="Selection size")
    simulate.add_argument("--q-grid", type=_int_list, help="Selection sizes, e.g. 2,3,4")
    simulate.add_argument("--p", type=int, default=10, help="Number of variables")
    simulate.add_argument("--transform", type=Transform, choices=list(Transform), default=Transform.NONE,
                          metavar="{none,continuous,ordinal}")
    simulate.add_argument("--targets", type=Targets, choices=list(Targets), default=Targets.IDEAL_ONLY,
                          metavar="{ideal,all}")
    simulate.add_argument("--method", "-m", dest="methods", action="append", type=CorrelationFamily,
                          choices=list(CorrelationFamily), metavar="METHOD",
                          help="Correlation family (repeatable; default: all admissible)")
    simulate.add_argument("--workers", type=int, default=1, help="Replicate threads")

    ree_parser = subparsers.add_parser("ree", parents=[common, data, family], help="Compare two subsets by REE")
    ree_parser.add_argument("--matrix", help="Correlation matrix file written by corr")
    ree_parser.add_argument("--subset", help="Candidate subset: indices or names, comma-separated")
    ree_parser.add_argument("--reference", help="Reference subset: indices or names, comma-separated")

    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> Tuple[CommandConfig, argparse.Namespace]:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        parser.exit(EXIT_INVALID)
    fields = {k: v for k, v in vars(args).items() if k in CommandConfig.model_fields and v is not None}
    try:
        return CommandConfig(**fields), args
    except ValidationError as exc:
        first = exc.errors()[0]
        message = str(first.get("ctx", {}).get("error") or first["msg"])
        location = ".".join(str(part) for part in first.get("loc", ()))
        raise InputError(f"{location}: {message}" if location else message)


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr, force=True,
    )


# =============================================================================
# COMMANDS
# =============================================================================

def _pipeline(config: CommandConfig, q: int = 1) -> SelectionPipeline:
    return SelectionPipeline(
        method=config.method or CorrelationFamily.COPULA,
        q=q,
        family=config.latent,
        pd_floor=config.pd_floor,
        max_levels=config.max_levels,
        continuous_margin=config.continuous_margin,
    )


def cmd_corr(config: CommandConfig) -> int:
    """Estimate, repair and write a correlation matrix."""
    pipeline = _pipeline(config)
    dataset = pipeline.load(config.input, config.schema_path)
    matrix = pipeline.estimate(dataset)
    for i, j in matrix.boundary_pairs:
        logger.warning("Boundary estimate: %s ~ %s", dataset.names[i], dataset.names[j])
    write_correlation(matrix, dataset.names, config.out, config.fmt)
    return EXIT_OK


def cmd_select(config: CommandConfig) -> int:
    """Ranked PVA report for one method, or the side-by-side table for all of them."""
    pipeline = _pipeline(config, q=config.q)
    dataset = pipeline.load(config.input, config.schema_path)
    if config.all_methods:
        outputs = pipeline.run_all_methods(dataset)
        rankings = {method.value: output.selection for method, output in outputs.items()}
        write_table1(rankings, dataset.names, config.out, config.fmt)
        return EXIT_OK
    output = pipeline.run(dataset)
    write_results(output.selection, config.out, config.fmt, names=dataset.names)
    return EXIT_OK


def simulation_grid(config: CommandConfig) -> Tuple[List[Scenario], Tuple[str, ...]]:
    """Scenarios and emitted metrics for a simulate invocation."""
    replicates = FULL_SCALE_REPLICATES if config.full_scale else config.replicates
    if config.figure:
        try:
            preset = figure_scenarios(config.figure, replicates=replicates, seed=config.seed)
        except ValidationError as exc:
            raise InputError(f"invalid figure preset: {exc.errors()[0]['msg']}")
        return preset.scenarios, preset.metrics

    n_grid = config.n_grid or [500]
    q_grid = config.q_grid or [config.q if config.q is not None else 5]
    methods = tuple(config.methods) if config.methods else methods_for(config.transform)
    scenarios = []
    for n, q in itertools.product(n_grid, q_grid):
        try:
            scenarios.append(Scenario(
                p=config.p, q=q, n=n, latent=config.family, transform=config.transform,
                targets=config.targets, methods=methods, replicates=replicates, seed=config.seed,
            ))
        except ValidationError as exc:
            raise InputError(f"invalid scenario (n={n}, q={q}): {exc.errors()[0]['msg']}")
    return scenarios, METRICS


def cmd_simulate(config: CommandConfig) -> int:
    """Run the scenario grid and write tidy rows."""
    scenarios, metrics = simulation_grid(config)
    logger.info("Running %d scenarios", len(scenarios))
    results = run_grid(scenarios, workers=config.workers)
    write_results(results, config.out, config.fmt, metrics=metrics)
    return EXIT_OK


def _indices(text: str, names: Sequence[str]) -> List[int]:
    lookup = {name: j for j, name in enumerate(names)}
    indices = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        if token in lookup:
            indices.append(lookup[token])
            continue
        try:
            indices.append(int(token))
        except ValueError:
            raise InputError(f"unknown variable '{token}'")
    return indices


def cmd_ree(config: CommandConfig) -> int:
    """REE of --subset against --reference, with both residual traces."""
    if config.matrix:
        matrix, names = load_correlation(config.matrix)
    else:
        pipeline = _pipeline(config)
        dataset = pipeline.load(config.input, config.schema_path)
        matrix, names = pipeline.estimate(dataset), list(dataset.names)

    subset = _indices(config.subset, names)
    reference = _indices(config.reference, names)
    family = config.latent
    value = ree(matrix, subset, reference, family)
    record = {
        "subset": " ".join(names[i] for i in subset),
        "reference": " ".join(names[i] for i in reference),
        "ree": value,
        "subset_trace": float(np.trace(cond_cov_subset(matrix, subset, family))),
        "reference_trace": float(np.trace(cond_cov_subset(matrix, reference, family))),
    }
    write_records([record], list(record), "ree", config.out, config.fmt)
    return EXIT_OK


HANDLERS = {
    "corr": cmd_corr,
    "select": cmd_select,
    "simulate": cmd_simulate,
    "ree": cmd_ree,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config, args = parse_config(argv)
    except PVAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    configure_logging(verbose=args.verbose, quiet=args.quiet)

    try:
        return HANDLERS[config.command](config)
    except PVAError as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
