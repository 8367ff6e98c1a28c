"""CSV ingestion against a declared column schema.

Input files are RFC-4180-style CSV with a header row (UTF-8).  An empty
string or the literal ``NaN`` marks a missing cell.  Each column is
declared up front: its kind decides parsing and, later, encoding.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, UsageError

COLUMN_KINDS = ("numeric", "nominal", "ordinal", "label", "drop")
MISSING_TOKENS = ("", "NaN")


@dataclass(frozen=True)
class ColumnSchema:
    """Declared name, kind, and (for ordinals) the category order.

    For a label column, `label_map` optionally folds raw label strings
    into coarser class names and `label_other` is the fallback class for
    unmapped values (None means unmapped values are an error).
    """

    name: str
    kind: str
    ordinal_order: tuple[str, ...] | None = None
    label_map: dict[str, str] | None = None
    label_other: str | None = None

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise UsageError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "ordinal":
            if not self.ordinal_order:
                raise UsageError(f"ordinal column {self.name!r} needs ordinal_order")
            if len(set(self.ordinal_order)) != len(self.ordinal_order):
                raise UsageError(f"ordinal column {self.name!r}: duplicate categories")
        elif self.ordinal_order is not None:
            raise UsageError(f"column {self.name!r}: ordinal_order only valid for kind=ordinal")


def validate_schema(columns: list[ColumnSchema]) -> None:
    names = [c.name for c in columns]
    if len(set(names)) != len(names):
        raise UsageError("schema has duplicate column names")
    labels = [c for c in columns if c.kind == "label"]
    if len(labels) != 1:
        raise UsageError(f"schema must declare exactly one label column, found {len(labels)}")


def load_schema(path: str | Path) -> tuple[list[ColumnSchema], bool]:
    """Read a schema config file (JSON).

    Format: {"columns": [{"name", "kind", "ordinal_order"?, "label_map"?,
    "label_other"?}, ...], "has_header": true}.  A bare list of column
    objects is also accepted.  Returns (columns, has_header).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"schema file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"schema file {path} is not valid JSON: {e}") from e
    if isinstance(doc, list):
        entries, has_header = doc, True
    elif isinstance(doc, dict):
        entries = doc.get("columns")
        has_header = bool(doc.get("has_header", True))
        if not isinstance(entries, list):
            raise UsageError(f"schema file {path}: expected a 'columns' list")
    else:
        raise UsageError(f"schema file {path}: expected an object or a list")
    columns = []
    for e in entries:
        try:
            columns.append(
                ColumnSchema(
                    name=e["name"],
                    kind=e["kind"],
                    ordinal_order=tuple(e["ordinal_order"]) if e.get("ordinal_order") else None,
                    label_map=dict(e["label_map"]) if e.get("label_map") else None,
                    label_other=e.get("label_other"),
                )
            )
        except KeyError as k:
            raise UsageError(f"schema entry {e!r} is missing {k}") from k
    validate_schema(columns)
    return columns, has_header


@dataclass
class RawTable:
    """Parsed rows in schema column order.

    Numeric cells are floats, everything else strings; missing cells are
    None.  Unparseable numeric cells count as missing.
    """

    columns: list[ColumnSchema]
    rows: list[list[object]] = field(default_factory=list)

    def __post_init__(self):
        validate_schema(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise DataError(
                    f"row has {len(r)} cells, schema has {len(self.columns)} columns"
                )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise UsageError(f"no column named {name!r}")

    @property
    def label_index(self) -> int:
        return next(i for i, c in enumerate(self.columns) if c.kind == "label")

    def subset(self, row_indices) -> "RawTable":
        return RawTable(self.columns, [self.rows[i] for i in row_indices])


def _parse_cell(raw: str, kind: str):
    if raw in MISSING_TOKENS:
        return None
    if kind == "numeric":
        try:
            return float(raw)
        except ValueError:
            return None
    return raw


def load_table(
    path: str | Path | list,
    schema: list[ColumnSchema],
    has_header: bool = True,
) -> RawTable:
    """Load one CSV file (or merge several with the same schema) into a RawTable.

    With a header, columns are matched to the schema by name
    (order-insensitive); without one, the file must have the schema's
    columns in declared order.
    """
    paths = [Path(p) for p in (path if isinstance(path, list) else [path])]
    if not paths:
        raise UsageError("no input CSV given")
    validate_schema(schema)
    rows: list[list[object]] = []
    for p in paths:
        if not p.exists():
            raise DataError(f"input file not found: {p}")
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if has_header:
                try:
                    header = next(reader)
                except StopIteration:
                    raise DataError(f"{p}: empty file") from None
                header = [h.strip() for h in header]
                wanted = [c.name for c in schema]
                if sorted(header) != sorted(wanted):
                    missing = sorted(set(wanted) - set(header))
                    extra = sorted(set(header) - set(wanted))
                    raise DataError(
                        f"{p}: header does not match schema"
                        f" (missing {missing}, unexpected {extra})"
                    )
                order = [header.index(name) for name in wanted]
            else:
                order = list(range(len(schema)))
            expected = len(header) if has_header else len(schema)
            for lineno, rec in enumerate(reader, start=2 if has_header else 1):
                if not rec or all(cell == "" for cell in rec):
                    continue
                if len(rec) != expected:
                    raise DataError(f"{p}:{lineno}: row has {len(rec)} cells, expected {expected}")
                rows.append(
                    [_parse_cell(rec[j].strip(), schema[i].kind) for i, j in enumerate(order)]
                )
    if not rows:
        raise DataError(f"no data rows in {', '.join(str(p) for p in paths)}")
    return RawTable(list(schema), rows)
