"""
Tabular input and result output.

CSV datasets with a header row, optional schema files (name, kind[:levels]),
correlation-matrix files, and CSV/JSON writers for selection and simulation
results. Missing cells are a hard error.
"""

import csv
import io
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .corrkit import CorrelationFamily, CorrelationMatrix, VariableKind
from .errors import (
    DegenerateColumnError,
    InputError,
    MissingValueError,
    SchemaError,
    column_label,
)
from .pva import LatentFamily, SelectionResult, selection_report
from .simgen import METRICS, ScenarioResult

logger = logging.getLogger("pva.dataio")

DEFAULT_MAX_LEVELS = 10
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})
FORMATS = ("csv", "json")

PathLike = Union[str, Path]


# =============================================================================
# DATASET TYPES
# =============================================================================

class SchemaSource(str, Enum):
    DECLARED = "declared"
    INFERRED = "inferred"


@dataclass(frozen=True)
class Schema:
    """Per-column variable kinds and where they came from."""
    kinds: Tuple[VariableKind, ...]
    source: SchemaSource = SchemaSource.INFERRED

    def __len__(self) -> int:
        return len(self.kinds)

    def __getitem__(self, index: int) -> VariableKind:
        return self.kinds[index]

    def __iter__(self) -> Iterator[VariableKind]:
        return iter(self.kinds)

    @property
    def ordinal_columns(self) -> List[int]:
        return [j for j, kind in enumerate(self.kinds) if kind.is_ordinal]


@dataclass(frozen=True)
class Dataset:
    """n x p numeric matrix (ordinal levels as their codes), column names, schema."""
    matrix: np.ndarray
    names: Tuple[str, ...]
    schema: Schema

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise InputError("dataset matrix must be 2-D")
        if len(self.names) != self.matrix.shape[1]:
            raise InputError(f"{len(self.names)} names for {self.matrix.shape[1]} columns")
        if len(set(self.names)) != len(self.names):
            raise InputError(f"duplicate column names: {_duplicates(self.names)}")
        if len(self.schema) != self.matrix.shape[1]:
            raise SchemaError(f"schema has {len(self.schema)} entries for {self.matrix.shape[1]} columns")
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]


def _duplicates(names: Sequence[str]) -> List[str]:
    seen, dup = set(), []
    for name in names:
        if name in seen and name not in dup:
            dup.append(name)
        seen.add(name)
    return dup


# =============================================================================
# SCHEMA
# =============================================================================

def _is_integer_column(column: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(column)) and np.all(column == np.round(column)))


def infer_schema(
    data, max_levels: int = DEFAULT_MAX_LEVELS, names: Optional[Sequence[str]] = None,
) -> Schema:
    """
    A column is ordinal iff all values are integers and it has between 2 and
    max_levels distinct values; otherwise continuous. Constant columns are an error.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise InputError("infer_schema needs a 2-D matrix")
    if max_levels < 2:
        raise InputError(f"max_levels must be at least 2, got {max_levels}")
    kinds = []
    for j in range(x.shape[1]):
        distinct = np.unique(x[:, j]).size
        if distinct < 2:
            raise DegenerateColumnError("constant column", column=column_label(j, names))
        if _is_integer_column(x[:, j]) and distinct <= max_levels:
            kinds.append(VariableKind.ordinal(distinct))
        else:
            kinds.append(VariableKind.continuous())
    return Schema(tuple(kinds), SchemaSource.INFERRED)


def parse_kind(text: str) -> Tuple[str, Optional[int]]:
    """'continuous' | 'ordinal' | 'ordinal:K' -> (kind, levels or None)."""
    name, _, levels = str(text).strip().lower().partition(":")
    if name == VariableKind.CONTINUOUS and not levels:
        return VariableKind.CONTINUOUS, None
    if name == VariableKind.ORDINAL:
        if not levels:
            return VariableKind.ORDINAL, None
        try:
            count = int(levels)
        except ValueError:
            raise SchemaError(f"invalid level count in '{text}'")
        if count < 2:
            raise SchemaError(f"ordinal variables need at least 2 levels, got '{text}'")
        return VariableKind.ORDINAL, count
    raise SchemaError(f"unknown variable kind '{text}', expected continuous, ordinal or ordinal:K")


def load_schema(path: PathLike) -> Dict[str, Tuple[str, Optional[int]]]:
    """
    Read a two-column schema file (name, kind[:levels]).
    A header row 'name,kind' is optional. Bare 'ordinal' takes its level count from the data.
    """
    declared: Dict[str, Tuple[str, Optional[int]]] = {}
    with open(path, "r", encoding="utf-8-sig", newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}: line {line_no} must have 2 fields (name, kind), got {len(row)}")
            name, kind = row[0].strip(), row[1].strip()
            if line_no == 1 and (name.lower(), kind.lower()) == ("name", "kind"):
                continue
            if name in declared:
                raise SchemaError(f"{path}: column '{name}' declared twice")
            declared[name] = parse_kind(kind)
    if not declared:
        raise SchemaError(f"{path}: empty schema file")
    return declared


def declared_schema(
    declaration: Union[Schema, Mapping[str, Tuple[str, Optional[int]]]],
    data: np.ndarray,
    names: Sequence[str],
) -> Schema:
    """
    Resolve and validate a declared schema against the data.
    Ordinal columns must hold integer codes with at least 2 and at most the declared number of levels.
    """
    p = data.shape[1]
    if isinstance(declaration, Schema):
        if len(declaration) != p:
            raise SchemaError(f"schema has {len(declaration)} entries for {p} columns")
        entries = [(k.kind, k.levels) for k in declaration]
    else:
        unknown = [name for name in declaration if name not in names]
        if unknown:
            raise SchemaError(f"schema names columns not in the data: {', '.join(unknown)}")
        missing = [name for name in names if name not in declaration]
        if missing:
            raise SchemaError(f"schema does not cover columns: {', '.join(missing)}")
        entries = [declaration[name] for name in names]

    kinds = []
    for j, (kind, levels) in enumerate(entries):
        column = data[:, j]
        distinct = np.unique(column).size
        if distinct < 2:
            raise DegenerateColumnError("constant column", column=column_label(j, names))
        if kind == VariableKind.CONTINUOUS:
            kinds.append(VariableKind.continuous())
            continue
        if not _is_integer_column(column):
            raise SchemaError(f"column {column_label(j, names)} is declared ordinal but has non-integer values")
        if levels is not None and distinct > levels:
            raise SchemaError(
                f"column {column_label(j, names)} is declared with {levels} levels but has {distinct}"
            )
        kinds.append(VariableKind.ordinal(levels if levels is not None else distinct))
    return Schema(tuple(kinds), SchemaSource.DECLARED)


# =============================================================================
# LOADING
# =============================================================================

def _parse_cell(cell: str, row: int, name: str) -> float:
    text = cell.strip()
    if text.lower() in MISSING_TOKENS:
        raise MissingValueError(f"missing value at row {row}, column {name}", row=row, column=name)
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"non-numeric value '{text}' at row {row}, column {name}")
    if not np.isfinite(value):
        raise InputError(f"non-finite value '{text}' at row {row}, column {name}")
    return value


def load_csv(
    path: PathLike,
    schema: Optional[Union[Schema, Mapping[str, Tuple[str, Optional[int]]]]] = None,
    max_levels: int = DEFAULT_MAX_LEVELS,
) -> Dataset:
    """
    Parse a UTF-8 CSV with a header row into a Dataset.

    Rows are numbered from 1 after the header. Without a schema the column
    kinds are inferred; a declared schema always wins over inference.
    """
    with open(path, "r", encoding="utf-8-sig", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        names = [h.strip() for h in header]
        if any(not name for name in names):
            raise InputError(f"{path}: header has an empty column name")
        if len(set(names)) != len(names):
            raise InputError(f"{path}: duplicate column names: {', '.join(_duplicates(names))}")

        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                # one-column files write a missing cell as an empty line
                if len(names) == 1:
                    raise MissingValueError(
                        f"missing value at row {row_no}, column {names[0]}", row=row_no, column=names[0]
                    )
                continue
            if len(row) != len(names):
                raise InputError(f"{path}: row {row_no} has {len(row)} fields, expected {len(names)}")
            rows.append([_parse_cell(cell, row_no, names[j]) for j, cell in enumerate(row)])

    if not rows:
        raise InputError(f"{path}: no data rows")
    matrix = np.array(rows, dtype=float)

    if schema is None:
        resolved = infer_schema(matrix, max_levels=max_levels, names=names)
    else:
        resolved = declared_schema(schema, matrix, names)
    logger.info(
        "Loaded %s: n=%d, p=%d (%d ordinal, schema %s)",
        path, matrix.shape[0], matrix.shape[1], len(resolved.ordinal_columns), resolved.source.value,
    )
    return Dataset(matrix=matrix, names=tuple(names), schema=resolved)


def load_dataset(path: PathLike, schema=None, max_levels: int = DEFAULT_MAX_LEVELS) -> Dataset:
    """CSV by default; a .json file holds {"schema", "names", "rows"}."""
    if Path(path).suffix.lower() != ".json":
        return load_csv(path, schema=schema, max_levels=max_levels)
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    try:
        names = [str(n) for n in payload["names"]]
        matrix = np.array(payload["rows"], dtype=float).reshape(-1, len(names))
        kinds = payload["schema"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed dataset JSON ({exc})")
    if np.any(np.isnan(matrix)):
        row, col = (int(v) for v in np.argwhere(np.isnan(matrix))[0])
        raise MissingValueError(
            f"missing value at row {row + 1}, column {names[col]}", row=row + 1, column=names[col]
        )
    declared = schema if schema is not None else {name: parse_kind(k) for name, k in zip(names, kinds)}
    return Dataset(matrix=matrix, names=tuple(names), schema=declared_schema(declared, matrix, names))


# =============================================================================
# WRITING
# =============================================================================

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _check_format(fmt: str) -> str:
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise InputError(f"unknown output format '{fmt}', expected one of {FORMATS}")
    return fmt


@contextmanager
def open_output(path: Optional[PathLike]):
    """Yield a text stream: the file at path, or stdout when path is None."""
    if path is None:
        yield sys.stdout
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        yield f


def _write_rows(stream, columns: Sequence[str], rows: Sequence[Mapping]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else _fmt(row.get(c)) for c in columns])


def _write_json(stream, payload: Dict):
    json.dump(payload, stream, indent=2, ensure_ascii=False)
    stream.write("\n")


def write_records(
    records: Sequence[Mapping], columns: Sequence[str], kind: str,
    path: Optional[PathLike] = None, fmt: str = "csv",
):
    """Plain record output: a CSV table, or {"kind", "records"} as JSON."""
    fmt = _check_format(fmt)
    with open_output(path) as out:
        if fmt == "json":
            _write_json(out, {"kind": kind, "records": [dict(r) for r in records]})
        else:
            _write_rows(out, columns, records)


def write_dataset(dataset: Dataset, path: Optional[PathLike] = None, fmt: str = "csv"):
    """Write a Dataset so that load_dataset reproduces it."""
    fmt = _check_format(fmt)
    with open_output(path) as out:
        if fmt == "json":
            _write_json(out, {
                "names": list(dataset.names),
                "schema": [str(kind) for kind in dataset.schema],
                "rows": dataset.matrix.tolist(),
            })
            return
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(dataset.names)
        for row in dataset.matrix:
            writer.writerow([_fmt(v) for v in row])


SELECTION_COLUMNS = ("rank", "index", "name", "residual_trace")
SIMULATION_COLUMNS = (
    "method", "metric", "mean", "stderr", "n", "q", "p", "transform", "targets",
    "family", "family_param", "replicates", "excluded",
)


def write_results(
    result: Union[SelectionResult, ScenarioResult, Sequence[ScenarioResult]],
    path: Optional[PathLike] = None,
    fmt: str = "csv",
    names: Optional[Sequence[str]] = None,
    metrics: Sequence[str] = METRICS,
):
    """
    Serialize a selection report or tidy simulation rows.

    CSV: one row per pick (rank, index, name, residual_trace) or one row per
    scenario x method x metric. JSON: {"kind", "records", ...} with enough
    metadata for read_results to rebuild the object.
    """
    fmt = _check_format(fmt)
    if isinstance(result, SelectionResult):
        records = selection_report(result, names)
        columns = SELECTION_COLUMNS
        payload = {
            "kind": "selection",
            "method": result.method.value if result.method else None,
            "family": str(result.family),
            "repaired": result.repaired,
            "conditioning": result.conditioning,
            "initial_trace": result.residual_trace[0],
            "records": records,
        }
    else:
        results = [result] if isinstance(result, ScenarioResult) else list(result)
        records = [row for r in results for row in r.tidy_rows(metrics)]
        columns = SIMULATION_COLUMNS
        payload = {
            "kind": "simulation",
            "metrics": list(metrics),
            "results": [r.model_dump(mode="json") for r in results],
            "records": records,
        }

    with open_output(path) as out:
        if fmt == "json":
            _write_json(out, payload)
        else:
            _write_rows(out, columns, records)


def read_results(path: PathLike) -> Union[SelectionResult, List[ScenarioResult]]:
    """Rebuild the object written by write_results(..., fmt="json")."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not a JSON results file ({exc})")
    kind = payload.get("kind")
    if kind == "selection":
        records = sorted(payload["records"], key=lambda r: r["rank"])
        return SelectionResult(
            chosen=[int(r["index"]) for r in records],
            residual_trace=[float(payload["initial_trace"])] + [float(r["residual_trace"]) for r in records],
            method=CorrelationFamily(payload["method"]) if payload.get("method") else None,
            family=LatentFamily.parse(payload.get("family", "gaussian")),
            repaired=bool(payload.get("repaired", False)),
            conditioning=payload.get("conditioning", "iterated"),
        )
    if kind == "simulation":
        return [ScenarioResult.model_validate(r) for r in payload["results"]]
    raise InputError(f"{path}: unknown results kind '{kind}'")


def write_table1(
    rankings: Mapping[str, SelectionResult],
    names: Sequence[str],
    path: Optional[PathLike] = None,
    fmt: str = "csv",
):
    """
    Side-by-side ranks of every method: one row per variable ranked by any
    method, blanks where a method did not pick it. Rows follow the first
    method's order, then each following method's order for the rest.
    """
    fmt = _check_format(fmt)
    methods = [str(getattr(m, "value", m)) for m in rankings]
    ranks: Dict[str, Dict[int, int]] = {
        method: {index: rank for rank, index in enumerate(result.chosen, start=1)}
        for method, result in zip(methods, rankings.values())
    }

    order: List[int] = []
    for result in rankings.values():
        order.extend(i for i in result.chosen if i not in order)

    records = []
    for index in order:
        row = {"name": column_label(index, names)}
        for method in methods:
            row[method] = ranks[method].get(index)
        records.append(row)

    with open_output(path) as out:
        if fmt == "json":
            _write_json(out, {"kind": "table1", "methods": methods, "records": records})
        else:
            _write_rows(out, ["name"] + methods, records)


# =============================================================================
# CORRELATION MATRIX FILES
# =============================================================================

def write_correlation(
    matrix: CorrelationMatrix,
    names: Sequence[str],
    path: Optional[PathLike] = None,
    fmt: str = "csv",
):
    """
    CSV: '#' header lines (family, repaired, boundary pairs) then a labelled
    square table. JSON: {"family", "repaired", "boundary_pairs", "names", "matrix"}.
    """
    fmt = _check_format(fmt)
    if len(names) != matrix.p:
        raise InputError(f"{len(names)} names for a {matrix.p} x {matrix.p} matrix")
    family = matrix.family.value if matrix.family else None
    with open_output(path) as out:
        if fmt == "json":
            _write_json(out, {
                "family": family,
                "repaired": matrix.repaired,
                "boundary_pairs": [list(pair) for pair in matrix.boundary_pairs],
                "names": list(names),
                "matrix": matrix.values.tolist(),
            })
            return
        out.write(f"# family: {family or 'none'}\n")
        out.write(f"# repaired: {str(matrix.repaired).lower()}\n")
        if matrix.boundary_pairs:
            pairs = ";".join(f"{names[i]}~{names[j]}" for i, j in matrix.boundary_pairs)
            out.write(f"# boundary: {pairs}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["name"] + list(names))
        for name, row in zip(names, matrix.values):
            writer.writerow([name] + [_fmt(v) for v in row])


def _family(text: Optional[str], path) -> Optional[CorrelationFamily]:
    if text in (None, "", "none"):
        return None
    try:
        return CorrelationFamily(text)
    except ValueError:
        raise InputError(f"{path}: unknown correlation family '{text}'")


def load_correlation(path: PathLike) -> Tuple[CorrelationMatrix, List[str]]:
    """Read a matrix written by write_correlation (either format)."""
    with open(path, "r", encoding="utf-8-sig") as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        names = [str(n) for n in payload["names"]]
        family = _family(payload.get("family"), path)
        matrix = CorrelationMatrix(
            np.array(payload["matrix"], dtype=float), family=family,
            repaired=bool(payload.get("repaired", False)),
            boundary_pairs=[tuple(pair) for pair in payload.get("boundary_pairs", [])],
        )
        return matrix, names

    meta: Dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    if not rows:
        raise InputError(f"{path}: empty correlation file")
    names = [h.strip() for h in rows[0][1:]]
    if len(rows) - 1 != len(names):
        raise InputError(f"{path}: matrix is not square ({len(rows) - 1} rows, {len(names)} columns)")
    values = []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(names) + 1:
            raise InputError(f"{path}: row {i} has {len(row) - 1} values, expected {len(names)}")
        values.append([_parse_cell(cell, i, names[j]) for j, cell in enumerate(row[1:])])

    family = _family(meta.get("family"), path)
    index = {name: j for j, name in enumerate(names)}
    boundary = []
    if meta.get("boundary"):
        for pair in meta["boundary"].split(";"):
            a, _, b = pair.partition("~")
            boundary.append((index[a], index[b]))
    matrix = CorrelationMatrix(
        np.array(values, dtype=float), family=family,
        repaired=meta.get("repaired") == "true", boundary_pairs=boundary,
    )
    return matrix, names
