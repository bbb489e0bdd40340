"""JSON input files and report serialization.

Matrices on disk are arrays of rows whose entries are ``[re, im]`` pairs.
A standalone matrix file wraps them as ``{"rows": r, "cols": c, "data": ...}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonFinite, ParseError, SchemaError
from .folner import parse_group

STATUSES = ("Certified", "HypothesisFailed", "Error")
EXIT_CODES = {"Certified": 0, "HypothesisFailed": 2, "Error": 1}


def _load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {type(x).__name__}")
    return float(x)


def matrix_from_rows(data, where="data", rows=None, cols=None) -> np.ndarray:
    """Validate an array of rows of ``[re, im]`` entries."""
    if not isinstance(data, list) or not data:
        raise SchemaError(f"{where}: expected a non-empty array of rows")
    width = None
    out = []
    for i, row in enumerate(data):
        if not isinstance(row, list):
            raise SchemaError(f"{where}[{i}]: expected an array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"{where}[{i}]: ragged row of length {len(row)}, expected {width}")
        vals = []
        for j, entry in enumerate(row):
            if not isinstance(entry, list) or len(entry) != 2:
                raise SchemaError(f"{where}[{i}][{j}]: expected [re, im]")
            re = _number(entry[0], f"{where}[{i}][{j}][0]")
            im = _number(entry[1], f"{where}[{i}][{j}][1]")
            if not (math.isfinite(re) and math.isfinite(im)):
                raise NonFinite(f"{where}[{i}][{j}]: non-finite entry {entry}")
            vals.append(complex(re, im))
        out.append(vals)
    if width == 0:
        raise SchemaError(f"{where}: rows are empty")
    m = np.array(out, dtype=np.complex128)
    if rows is not None and m.shape[0] != rows:
        raise SchemaError(f"{where}: {m.shape[0]} rows, header says {rows}")
    if cols is not None and m.shape[1] != cols:
        raise SchemaError(f"{where}: {m.shape[1]} columns, header says {cols}")
    return m


def matrix_from_json(obj, where="matrix") -> np.ndarray:
    """Either ``{"rows", "cols", "data"}`` or a bare array of rows."""
    if isinstance(obj, dict):
        for key in ("rows", "cols", "data"):
            if key not in obj:
                raise SchemaError(f"{where}: missing field {key!r}")
        r, c = obj["rows"], obj["cols"]
        for key, v in (("rows", r), ("cols", c)):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise SchemaError(f"{where}.{key}: expected a positive integer")
        return matrix_from_rows(obj["data"], f"{where}.data", r, c)
    return matrix_from_rows(obj, where)


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def parse_matrix_file(path) -> np.ndarray:
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top level must be an object with rows, cols, data")
    return matrix_from_json(obj, "matrix")


def _rep_parts(obj, path):
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top level must be an object")
    for key in ("group", "generators"):
        if key not in obj:
            raise SchemaError(f"{path}: missing field {key!r}")
    if not isinstance(obj["group"], str):
        raise SchemaError("group: expected a descriptor name")
    gens = obj["generators"]
    if not isinstance(gens, dict) or not gens:
        raise SchemaError("generators: expected a non-empty object")
    images = {k: matrix_from_json(v, f"generators.{k}") for k, v in gens.items()}
    dim = obj.get("dim")
    if dim is not None:
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise SchemaError("dim: expected a positive integer")
        for k, m in images.items():
            if m.shape != (dim, dim):
                raise SchemaError(f"generators.{k}: shape {m.shape}, expected ({dim}, {dim})")
    descriptor = parse_group(obj["group"], base_dir=Path(path).parent)
    return descriptor, images


def parse_representation_file(path):
    """``Representation`` from ``{"group", "dim", "generators"}``."""
    from .representations import Representation

    obj = _load_json(path)
    descriptor, images = _rep_parts(obj, path)
    return Representation(descriptor, images)


def parse_derivation_file(path):
    """``DerivationMap`` from a representation file with a ``derivation`` object."""
    from .derivations import DerivationMap
    from .representations import Representation

    obj = _load_json(path)
    descriptor, images = _rep_parts(obj, path)
    if "derivation" not in obj or not isinstance(obj["derivation"], dict):
        raise SchemaError(f"{path}: missing object field 'derivation'")
    d_images = {k: matrix_from_json(v, f"derivation.{k}") for k, v in obj["derivation"].items()}
    return DerivationMap(Representation(descriptor, images), d_images)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# -- reports -------------------------------------------------------------------


@dataclass
class Report:
    """Outcome of one CLI run. All fields hold plain JSON types."""

    command: str
    status: str
    reasons: list = field(default_factory=list)
    message: str = ""
    certificate: dict | None = None
    diagnostics: list = field(default_factory=list)  # [name, value]
    table: list = field(default_factory=list)  # [N, item, value]

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]


def to_jsonable(x):
    """Numpy scalars/arrays and nested containers to plain JSON types."""
    if isinstance(x, np.ndarray):
        if x.ndim == 2:
            return matrix_to_json(x)
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    return x


def report_to_json(report: Report) -> str:
    return json.dumps(asdict(report), indent=2, allow_nan=True)


def report_from_json(text: str) -> Report:
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise SchemaError("report: top level must be an object")
    try:
        return Report(**obj)
    except TypeError as exc:
        raise SchemaError(f"report: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return json.dumps(v) if isinstance(v, (list, dict)) else str(v)


def report_to_csv(report: Report) -> str:
    """Columns ``N, item, value``; scalar diagnostics get an empty ``N``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "item", "value"])
    w.writerow(["", "status", report.status])
    for r in report.reasons:
        w.writerow(["", "reason", r])
    for name, value in report.diagnostics:
        if not isinstance(value, (list, dict)):
            w.writerow(["", name, _fmt(value)])
    for n, item, value in report.table:
        w.writerow([n, item, _fmt(value)])
    return buf.getvalue()


def report_to_text(report: Report) -> str:
    lines = [f"command: {report.command}", f"status: {report.status}"]
    if report.reasons:
        lines.append("reasons: " + ", ".join(report.reasons))
    if report.message:
        lines.append(f"message: {report.message}")
    if report.certificate:
        lines.append("certificate:")
        for k, v in report.certificate.items():
            if _is_matrix(v):
                lines.append(f"  {k}:")
                lines.extend("    " + row for row in _matrix_lines(v))
            else:
                lines.append(f"  {k}: {_fmt(v)}")
    if report.diagnostics:
        lines.append("diagnostics:")
        for name, value in report.diagnostics:
            lines.append(f"  {name}: {_fmt(value)}")
    if report.table:
        lines.append("table (N, item, value):")
        for n, item, value in report.table:
            lines.append(f"  {n:>6}  {item:<24} {_fmt(value)}")
    return "\n".join(lines) + "\n"


def _is_matrix(v) -> bool:
    return (isinstance(v, list) and v and isinstance(v[0], list) and v[0]
            and isinstance(v[0][0], list) and len(v[0][0]) == 2)


def _matrix_lines(v) -> list[str]:
    out = []
    for row in v:
        cells = []
        for re, im in row:
            cells.append(f"{re:+.10g}" if im == 0 else f"{re:+.10g}{im:+.10g}j")
        out.append("[" + "  ".join(cells) + "]")
    return out


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return report_to_json(report) + "\n"
    if fmt == "csv":
        return report_to_csv(report)
    return report_to_text(report)
