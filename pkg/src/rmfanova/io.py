"""
Reading and writing datasets, reports and simulation configs.

CSV layouts
-----------
``long``
    Header ``subject,condition,grid_index,value`` with an optional ``t``
    column giving the abscissa of each grid index.  One row per cell value.
``wide``
    Header ``subject,condition,<v1>,...,<vp>``; one row per (subject,
    condition).  When every value-column header parses as a number the
    headers are used as abscissae.

Abscissae already inside ``[0, 1]`` are used as given; anything else is
mapped affinely onto ``[0, 1]``.  Without abscissae the grid is ``p``
equispaced points on ``[0, 1]``.  Subjects and conditions keep their order of
first appearance.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .core import FunctionalDataset, Grid
from .errors import IngestionError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = "1.0"
LONG_COLUMNS = ("subject", "condition", "grid_index", "value")


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise IngestionError(f"row {row}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise IngestionError(f"row {row}: column {column!r} is not finite: {text!r}")
    return v


def _grid_from_abscissae(x) -> Grid:
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise IngestionError("grid abscissae must be strictly increasing")
    if x[0] >= 0.0 and x[-1] <= 1.0:
        return Grid(x)
    return Grid.from_physical(x)


def _dataset(values, grid, subjects, conditions) -> FunctionalDataset:
    try:
        return FunctionalDataset(values, grid, subjects, conditions)
    except ValueError as exc:
        raise IngestionError(str(exc)) from exc


def _read_rows(path):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = [(reader.line_num, r) for r in reader if any(c.strip() for c in r)]
    return header, rows


def _read_long(path) -> FunctionalDataset:
    header, rows = _read_rows(path)
    missing = [c for c in LONG_COLUMNS if c not in header]
    if missing:
        raise IngestionError(f"{path}: long layout needs columns {LONG_COLUMNS}, missing {missing}")
    col = {name: header.index(name) for name in header}
    has_t = "t" in col
    subjects, conditions, cells, abscissa = {}, {}, {}, {}
    for line, r in rows:
        if len(r) != len(header):
            raise IngestionError(f"row {line}: expected {len(header)} fields, got {len(r)}")
        subj, cond = r[col["subject"]].strip(), r[col["condition"]].strip()
        try:
            k = int(r[col["grid_index"]])
        except ValueError:
            raise IngestionError(f"row {line}: grid_index is not an integer: "
                                 f"{r[col['grid_index']]!r}") from None
        value = _parse_float(r[col["value"]], line, "value")
        subjects.setdefault(subj, len(subjects))
        conditions.setdefault(cond, len(conditions))
        key = (subj, cond, k)
        if key in cells:
            raise IngestionError(f"row {line}: duplicate cell subject={subj!r}, "
                                 f"condition={cond!r}, grid_index={k}")
        cells[key] = value
        if has_t:
            t = _parse_float(r[col["t"]], line, "t")
            if abscissa.setdefault(k, t) != t:
                raise IngestionError(f"row {line}: grid_index {k} has conflicting t values")
    if not cells:
        raise IngestionError(f"{path}: no data rows")
    index = sorted({k for (_, _, k) in cells})
    values = np.empty((len(subjects), len(conditions), len(index)))
    for subj, j in subjects.items():
        for cond, i in conditions.items():
            for q, k in enumerate(index):
                try:
                    values[j, i, q] = cells[(subj, cond, k)]
                except KeyError:
                    raise IngestionError(f"missing cell: subject={subj!r}, condition={cond!r}, "
                                         f"grid_index={k}") from None
    grid = _grid_from_abscissae([abscissa[k] for k in index]) if has_t else None
    return _dataset(values, grid, list(subjects), list(conditions))


def _read_wide(path) -> FunctionalDataset:
    header, rows = _read_rows(path)
    if header[:2] != ["subject", "condition"] or len(header) < 4:
        raise IngestionError(f"{path}: wide layout needs header subject,condition,<values...> "
                             "with at least 2 value columns")
    value_cols = header[2:]
    try:
        x = [float(h) for h in value_cols]
        grid = _grid_from_abscissae(x) if all(math.isfinite(v) for v in x) else None
    except ValueError:
        grid = None
    subjects, conditions, cells = {}, {}, {}
    for line, r in rows:
        if len(r) != len(header):
            raise IngestionError(f"row {line}: expected {len(header)} fields, got {len(r)}")
        subj, cond = r[0].strip(), r[1].strip()
        if (subj, cond) in cells:
            raise IngestionError(f"row {line}: duplicate row subject={subj!r}, condition={cond!r}")
        subjects.setdefault(subj, len(subjects))
        conditions.setdefault(cond, len(conditions))
        cells[(subj, cond)] = [_parse_float(v, line, c) for v, c in zip(r[2:], value_cols)]
    if not cells:
        raise IngestionError(f"{path}: no data rows")
    values = np.empty((len(subjects), len(conditions), len(value_cols)))
    for subj, j in subjects.items():
        for cond, i in conditions.items():
            if (subj, cond) not in cells:
                raise IngestionError(f"missing cell: subject={subj!r}, condition={cond!r}, "
                                     f"grid_index=1")
            values[j, i] = cells[(subj, cond)]
    return _dataset(values, grid, list(subjects), list(conditions))


def read_dataset_csv(path, layout: str = "long") -> FunctionalDataset:
    """Load a dataset from a CSV file in the ``long`` or ``wide`` layout.

    Raises
    ------
    IngestionError
        Missing or duplicate cells, unparseable numbers (with the row
        number), or a table that does not form a valid dataset.
    """
    if layout == "long":
        return _read_long(path)
    if layout == "wide":
        return _read_wide(path)
    raise ValueError(f"layout must be 'long' or 'wide', got {layout!r}")


def write_dataset_csv(data: FunctionalDataset, path, layout: str = "long") -> None:
    """Write ``data`` so that :func:`read_dataset_csv` restores it exactly."""
    t = data.grid.points
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if layout == "long":
            w.writerow(LONG_COLUMNS + ("t",))
            for j, subj in enumerate(data.subject_labels):
                for i, cond in enumerate(data.condition_labels):
                    for k in range(data.n_points):
                        w.writerow([subj, cond, k + 1, repr(float(data.values[j, i, k])),
                                    repr(float(t[k]))])
        elif layout == "wide":
            w.writerow(["subject", "condition"] + [repr(float(v)) for v in t])
            for j, subj in enumerate(data.subject_labels):
                for i, cond in enumerate(data.condition_labels):
                    w.writerow([subj, cond] + [repr(float(v)) for v in data.values[j, i]])
        else:
            raise ValueError(f"layout must be 'long' or 'wide', got {layout!r}")


# ---------------------------------------------------------------------------
# JSON reports
# ---------------------------------------------------------------------------

def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite(value):
    # JSON has no infinity; unbounded statistics are reported as null
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def dumps_report(kind: str, body: dict) -> str:
    report = {"schema_version": SCHEMA_VERSION, "kind": kind, **body}
    return json.dumps(_finite(report), indent=2, default=_json_default) + "\n"


def write_report(path, kind: str, body: dict) -> None:
    Path(path).write_text(dumps_report(kind, body), encoding="utf-8")


def schema_path(kind: str) -> Path:
    return Path(__file__).with_name("schemas") / f"{kind}_report.schema.json"


def load_schema(kind: str) -> dict:
    return json.loads(schema_path(kind).read_text(encoding="utf-8"))


def dataset_summary(data: FunctionalDataset) -> dict:
    return {"n_subjects": data.n_subjects, "n_conditions": data.n_conditions,
            "n_points": data.n_points, "condition_labels": list(data.condition_labels)}


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def percent(x: float) -> str:
    return f"{100.0 * x:.1f}"


def cell_label(statistic, method) -> str:
    return f"{getattr(statistic, 'value', statistic)}-{getattr(method, 'value', method)}"


def write_posthoc_table(path, reports) -> None:
    """Rows = pairs, columns = statistic-method, values = adjusted p-values in percent."""
    if not reports:
        raise ValueError("no reports to tabulate")
    labels = [pr.label for pr in reports[0].pairs]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["pair"] + [cell_label(r.statistic, r.method) for r in reports])
        for q, label in enumerate(labels):
            w.writerow([label] + [percent(r.pairs[q].p_adjusted) for r in reports])


def write_simulation_table(path, rows: Iterable[tuple], key_names: Iterable[str]) -> None:
    """``rows`` are ``(keys, summary)``; columns are statistic-method rates in percent."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to tabulate")
    first = rows[0][1]
    cells = [(k, m) for k in first.statistics for m in first.methods]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(key_names) + [cell_label(k, m) for k, m in cells])
        for keys, summary in rows:
            rates = summary.fwer if summary.mode == "posthoc" else summary.rejection_rate
            w.writerow(list(keys) + [percent(rates[c]) for c in cells])


# ---------------------------------------------------------------------------
# simulation configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationConfig:
    """Parsed ``[simulation]`` table of a TOML config."""

    mode: str
    model: str
    distributions: tuple
    rhos: tuple
    n: int
    p: Optional[int]
    xi: Optional[float]
    grid_kind: Optional[str]
    B: int
    n_runs: int
    alpha: float
    seed: int
    statistics: tuple
    methods: tuple
    source: Optional[Path] = None
    source_layout: str = "long"
    hypothesis: str = "null"
    table: Optional[Path] = None
    json: Optional[Path] = None


_CONFIG_KEYS = {"mode", "model", "distribution", "rho", "n", "p", "xi", "grid", "B", "n_runs",
                "alpha", "seed", "statistics", "methods", "source", "layout", "hypothesis"}


def _as_tuple(v):
    return tuple(v) if isinstance(v, list) else (v,)


def load_simulation_config(path) -> SimulationConfig:
    """Parse a simulation config file.

    Example::

        [simulation]
        mode = "global"          # or "posthoc" for family-wise error
        model = "M1"
        distribution = "normal"  # a list gives one table row per value
        rho = [0.0, 0.75]
        n = 35
        B = 500
        n_runs = 500
        seed = 1

        [output]
        table = "m1_size.csv"
        json = "m1_size.json"

    Raises
    ------
    IngestionError
        Unreadable TOML, unknown keys or values of the wrong type.
    """
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise IngestionError(f"{path}: invalid TOML: {exc}") from exc
    sim = doc.get("simulation")
    if not isinstance(sim, dict):
        raise IngestionError(f"{path}: missing [simulation] table")
    unknown = set(sim) - _CONFIG_KEYS
    if unknown:
        raise IngestionError(f"{path}: unknown simulation keys {sorted(unknown)}")
    out = doc.get("output", {})
    if not isinstance(out, dict) or set(out) - {"table", "json"}:
        raise IngestionError(f"{path}: [output] accepts only 'table' and 'json'")
    base = path.parent
    model = sim.get("model", "M1")
    default_dist = "normal"
    try:
        cfg = SimulationConfig(
            mode=str(sim.get("mode", "global")),
            model=str(model),
            distributions=tuple(str(d) for d in _as_tuple(sim.get("distribution", default_dist))),
            rhos=tuple(float(r) for r in _as_tuple(sim.get("rho", 0.0))),
            n=_int(sim.get("n", 35), "n"),
            p=None if "p" not in sim else _int(sim["p"], "p"),
            xi=None if "xi" not in sim else float(sim["xi"]),
            grid_kind=sim.get("grid"),
            B=_int(sim.get("B", 500), "B"),
            n_runs=_int(sim.get("n_runs", 500), "n_runs"),
            alpha=float(sim.get("alpha", 0.05)),
            seed=_int(sim.get("seed", 0), "seed"),
            statistics=tuple(str(s) for s in _as_tuple(sim.get("statistics", ["C", "D", "E"]))),
            methods=tuple(str(m) for m in _as_tuple(
                sim.get("methods", ["P1", "P2", "B1", "B2", "B3"]))),
            source=None if "source" not in sim else base / str(sim["source"]),
            source_layout=str(sim.get("layout", "long")),
            hypothesis=str(sim.get("hypothesis", "null")),
            table=None if "table" not in out else Path(out["table"]),
            json=None if "json" not in out else Path(out["json"]),
        )
    except (TypeError, ValueError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    if cfg.mode not in ("global", "posthoc"):
        raise IngestionError(f"{path}: mode must be 'global' or 'posthoc', got {cfg.mode!r}")
    if cfg.model == "GP" and cfg.source is None:
        raise IngestionError(f"{path}: model 'GP' needs a source dataset")
    return cfg


def _int(v, name) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"{name} must be an integer, got {v!r}")
    return v
