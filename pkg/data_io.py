"""
Tabular ingestion: schema files, CSV parsing, one-hot / quantile encoding
onto {0,1}^n and background selection.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import DimensionMismatchError, SchemaError
from shap_engine import BackgroundDataset

logger = logging.getLogger(__name__)

KINDS = ("binary", "categorical", "continuous")
DEFAULT_BINS = 4
STRATEGIES = ("first_rows", "random")
# header occupies line 1
FIRST_DATA_LINE = 2


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    bins: int = DEFAULT_BINS


def _schema_from_list(payload, where: str) -> List[ColumnSpec]:
    if not isinstance(payload, list) or not payload:
        raise SchemaError("schema must be a non-empty list of columns", where or "/")
    specs, seen = [], set()
    for c, item in enumerate(payload):
        if not isinstance(item, dict):
            raise SchemaError("column entry must be an object", f"/{c}")
        name = item.get("name")
        if not isinstance(name, str) or not name:
            raise SchemaError("column name must be a non-empty string", f"/{c}/name")
        if name in seen:
            raise SchemaError(f"duplicate column {name!r}", f"/{c}/name")
        seen.add(name)
        kind = item.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"kind must be one of {KINDS}", f"/{c}/kind")
        bins = item.get("bins", DEFAULT_BINS)
        if isinstance(bins, bool) or not isinstance(bins, int) or bins < 1:
            raise SchemaError("bins must be a positive integer", f"/{c}/bins")
        specs.append(ColumnSpec(name, kind, bins))
    return specs


def load_schema(path: Union[str, Path]) -> List[ColumnSpec]:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON in {path}: {e.msg}", line=e.lineno)
    return _schema_from_list(payload, "")


# ---------------------------------------------------------------------------
# encoding report
# ---------------------------------------------------------------------------

@dataclass
class ColumnEncoding:
    """Where one source column lives in the encoded vector.

    categorical: indices[j] is the bit of levels[j]
    continuous:  indices[j] is bin j; bin = searchsorted(edges, v, 'right')
    binary:      a single index
    """
    name: str
    kind: str
    indices: List[int]
    levels: List[str] = field(default_factory=list)
    edges: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "indices": list(self.indices)}
        if self.kind == "categorical":
            out["levels"] = list(self.levels)
        if self.kind == "continuous":
            out["edges"] = list(self.edges)
        return out


@dataclass
class EncodingReport:
    columns: List[ColumnEncoding]

    @property
    def width(self) -> int:
        return 1 + max((i for c in self.columns for i in c.indices), default=-1)

    def encoded_names(self) -> List[str]:
        names = [""] * self.width
        for col in self.columns:
            if col.kind == "binary":
                names[col.indices[0]] = col.name
            elif col.kind == "categorical":
                for level, i in zip(col.levels, col.indices):
                    names[i] = f"{col.name}={level}"
            else:
                for b, i in enumerate(col.indices):
                    names[i] = f"{col.name}[bin {b}]"
        return names

    def to_dict(self) -> dict:
        return {"width": self.width, "columns": [c.to_dict() for c in self.columns],
                "encoded_names": self.encoded_names()}

    @classmethod
    def from_dict(cls, payload) -> "EncodingReport":
        if not isinstance(payload, dict) or not isinstance(payload.get("columns"), list):
            raise SchemaError("encoding report needs a 'columns' list", "/columns")
        cols = []
        for c, item in enumerate(payload["columns"]):
            try:
                cols.append(ColumnEncoding(item["name"], item["kind"], [int(i) for i in item["indices"]],
                                           [str(v) for v in item.get("levels", [])],
                                           [float(v) for v in item.get("edges", [])]))
            except (KeyError, TypeError, ValueError):
                raise SchemaError("malformed column encoding", f"/columns/{c}")
        return cls(cols)

    def save(self, path: Union[str, Path]):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EncodingReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def quantile_edges(values: np.ndarray, bins: int) -> List[float]:
    """Left-closed bin edges over sorted unique values; ties go to the lower bin"""
    uniq = np.unique(values)
    if uniq.size == 0 or bins < 2:
        return []
    picks = [uniq[(j * uniq.size) // bins] for j in range(1, bins)]
    edges = []
    for v in picks:
        if not edges or v > edges[-1]:
            edges.append(float(v))
    # an edge at the minimum would leave bin 0 empty
    return [e for e in edges if e > uniq[0]]


def _numeric(series: pd.Series, name: str, path: str) -> np.ndarray:
    parsed = pd.to_numeric(series.str.strip(), errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
        row = int(bad[0])
        raise SchemaError(f"malformed numeric cell {series.iloc[row]!r} in column {name!r} of {path}",
                          line=row + FIRST_DATA_LINE)
    return parsed.to_numpy(dtype=np.float64)


def _binary(series: pd.Series, name: str, path: str) -> np.ndarray:
    cells = series.str.strip()
    ok = cells.isin(("0", "1")).to_numpy()
    if not ok.all():
        row = int(np.flatnonzero(~ok)[0])
        raise SchemaError(f"binary column {name!r} holds {series.iloc[row]!r} in {path}",
                          line=row + FIRST_DATA_LINE)
    return (cells == "1").to_numpy().astype(np.uint8)


def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path} has no header row", line=1)


def _check_columns(frame: pd.DataFrame, schema: Sequence[ColumnSpec], path: str):
    names = [c.name for c in schema]
    missing = [c for c in names if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path} lacks schema columns {missing}", line=1)
    extra = [c for c in frame.columns if c not in names]
    if extra:
        raise SchemaError(f"{path} has columns {extra} not covered by the schema", line=1)


def fit_encoding(frame: pd.DataFrame, schema: Sequence[ColumnSpec], path: str = "") -> EncodingReport:
    columns, width = [], 0
    for spec in schema:
        series = frame[spec.name]
        if spec.kind == "binary":
            _binary(series, spec.name, path)
            columns.append(ColumnEncoding(spec.name, "binary", [width]))
            width += 1
        elif spec.kind == "categorical":
            levels = list(dict.fromkeys(series.str.strip()))
            columns.append(ColumnEncoding(spec.name, "categorical",
                                          list(range(width, width + len(levels))), levels))
            width += len(levels)
        else:
            edges = quantile_edges(_numeric(series, spec.name, path), spec.bins)
            columns.append(ColumnEncoding(spec.name, "continuous",
                                          list(range(width, width + spec.bins)), edges=edges))
            width += spec.bins
    return EncodingReport(columns)


def encode_frame(frame: pd.DataFrame, report: EncodingReport,
                 path: str = "") -> Tuple[np.ndarray, EncodingReport]:
    """Encode raw rows with a stored report.

    Unseen categorical levels get a new one-hot column appended after the
    current width; the returned report includes them.
    """
    names = [c.name for c in report.columns]
    missing = [c for c in names if c not in frame.columns]
    if missing:
        raise DimensionMismatchError(f"{path or 'rows'} lack encoded columns {missing}", "queries")
    columns = [ColumnEncoding(c.name, c.kind, list(c.indices), list(c.levels), list(c.edges))
               for c in report.columns]
    width = EncodingReport(columns).width
    for col in columns:
        if col.kind != "categorical":
            continue
        for level in dict.fromkeys(frame[col.name].str.strip()):
            if level not in col.levels:
                logger.warning("unknown level %r in column %r: appending encoded column %d",
                               level, col.name, width)
                col.levels.append(level)
                col.indices.append(width)
                width += 1
    points = np.zeros((frame.shape[0], width), dtype=np.uint8)
    rows = np.arange(frame.shape[0])
    for col in columns:
        series = frame[col.name]
        if col.kind == "binary":
            points[:, col.indices[0]] = _binary(series, col.name, path)
        elif col.kind == "categorical":
            lookup = dict(zip(col.levels, col.indices))
            points[rows, [lookup[v] for v in series.str.strip()]] = 1
        else:
            bins = np.searchsorted(np.asarray(col.edges), _numeric(series, col.name, path), side="right")
            points[rows, np.asarray(col.indices)[bins]] = 1
    return points, EncodingReport(columns)


def decode_row(bits, report: EncodingReport) -> Dict[str, Union[str, int]]:
    """Inverse of the encoding: level for categorical, bin index for continuous"""
    bits = np.asarray(bits).ravel()
    if bits.size != report.width:
        raise DimensionMismatchError(f"row has {bits.size} bits, encoding has {report.width}", "row")
    out = {}
    for col in report.columns:
        if col.kind == "binary":
            out[col.name] = str(int(bits[col.indices[0]]))
            continue
        hot = np.flatnonzero(bits[col.indices])
        if hot.size != 1:
            raise ValueError(f"column {col.name!r} has {hot.size} hot bits")
        out[col.name] = col.levels[hot[0]] if col.kind == "categorical" else int(hot[0])
    return out


@dataclass
class TabularDataset:
    schema: List[ColumnSpec]
    frame: pd.DataFrame
    points: np.ndarray
    report: EncodingReport

    @property
    def n(self) -> int:
        return int(self.points.shape[1])

    @property
    def rows(self) -> int:
        return int(self.points.shape[0])

    def encode(self, frame: pd.DataFrame, path: str = "") -> Tuple[np.ndarray, EncodingReport]:
        _check_columns(frame, self.schema, path)
        return encode_frame(frame, self.report, path)

    def decode(self, row: int) -> Dict[str, Union[str, int]]:
        return decode_row(self.points[row], self.report)


def load_csv(path: Union[str, Path], schema: Union[Sequence[ColumnSpec], str, Path]) -> TabularDataset:
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    schema = list(schema)
    frame = _read_frame(path)
    _check_columns(frame, schema, str(path))
    report = fit_encoding(frame, schema, str(path))
    points, report = encode_frame(frame, report, str(path))
    points.setflags(write=False)
    logger.info("loaded %s: %d rows, %d columns -> n=%d", path, frame.shape[0], len(schema), report.width)
    return TabularDataset(schema, frame, points, report)


def load_queries(path: Union[str, Path], dataset: TabularDataset) -> np.ndarray:
    points, report = dataset.encode(_read_frame(path), str(path))
    if report.width != dataset.n:
        logger.warning("queries widen the encoding from %d to %d columns", dataset.n, report.width)
    return points


def load_points_csv(path: Union[str, Path], n: Optional[int] = None) -> np.ndarray:
    """Pre-encoded 0/1 points, one column per feature under a header row"""
    frame = _read_frame(path)
    width = frame.shape[1]
    if n is not None and width != n:
        raise DimensionMismatchError(f"{path} has {width} columns, expected {n}", Path(path).name)
    if frame.shape[0] == 0:
        return np.zeros((0, width), dtype=np.uint8)
    cells = frame.apply(lambda s: s.str.strip())
    ok = cells.isin(("0", "1")).to_numpy()
    if not ok.all():
        row, col = (int(v[0]) for v in np.nonzero(~ok))
        raise SchemaError(f"cell {frame.iat[row, col]!r} in column {frame.columns[col]!r} is not 0/1",
                          line=row + FIRST_DATA_LINE)
    return (cells == "1").to_numpy().astype(np.uint8)


# ---------------------------------------------------------------------------
# background selection and group reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BackgroundSpec:
    strategy: str = "first_rows"
    size: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.size < 1:
            raise ValueError("background size must be positive")


def select_background(ds: Union[TabularDataset, np.ndarray], spec: BackgroundSpec) -> BackgroundDataset:
    points = ds.points if isinstance(ds, TabularDataset) else np.asarray(ds, dtype=np.uint8)
    rows = points.shape[0]
    if spec.size > rows:
        raise ValueError(f"background size {spec.size} exceeds {rows} rows")
    if spec.strategy == "first_rows":
        chosen = np.arange(spec.size)
    else:
        chosen = np.random.default_rng(spec.seed).permutation(rows)[:spec.size]
    logger.debug("background: %s rows %s", spec.strategy, chosen.tolist())
    return BackgroundDataset(points[chosen], labels=chosen.tolist())


def group_slices(report: EncodingReport) -> Dict[str, List[int]]:
    return {col.name: list(col.indices) for col in report.columns}


def aggregate_groups(phi: np.ndarray, report: EncodingReport) -> pd.DataFrame:
    """Sum per-bit attributions over each source column's one-hot group"""
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    if phi.shape[1] != report.width:
        raise DimensionMismatchError(f"{phi.shape[1]} attributions for width {report.width}", "encoding")
    records = []
    for q in range(phi.shape[0]):
        for name, idx in group_slices(report).items():
            records.append({"query_id": q, "column": name, "phi": float(phi[q, idx].sum())})
    return pd.DataFrame.from_records(records, columns=["query_id", "column", "phi"])
