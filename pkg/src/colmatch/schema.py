"""Schema, column and ground-truth types, plus their file loaders.

Schema files are JSON documents::

    {"name": "...", "tables": [
        {"name": "...", "description": "...",
         "columns": [{"name": "...", "description": "...", "data_type": "..."}]}]}

Ground-truth files are CSV with the header
``source_table,source_column,target_table,target_column``; the literal token
``NA`` in both target fields marks an unmatchable source column.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from colmatch.errors import SchemaError

NA_TOKEN = "NA"
GROUND_TRUTH_HEADER = ("source_table", "source_column", "target_table", "target_column")


@dataclass(frozen=True, eq=False)
class ColumnRef:
    """A (table, column) pair. Case is preserved for display, ignored for equality."""

    table_name: str
    column_name: str

    def __post_init__(self) -> None:
        table = self.table_name.strip() if isinstance(self.table_name, str) else ""
        column = self.column_name.strip() if isinstance(self.column_name, str) else ""
        if not table or not column:
            raise SchemaError(f"column reference needs a table and a column, got {self.table_name!r}.{self.column_name!r}")
        object.__setattr__(self, "table_name", table)
        object.__setattr__(self, "column_name", column)

    @property
    def key(self) -> tuple[str, str]:
        return (self.table_name.lower(), self.column_name.lower())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColumnRef):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: ColumnRef) -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return f"{self.table_name}.{self.column_name}"

    def to_dict(self) -> dict[str, str]:
        return {"table": self.table_name, "column": self.column_name}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ColumnRef:
        return cls(data["table"], data["column"])


@dataclass(frozen=True)
class ColumnMeta:
    ref: ColumnRef
    description: str = ""
    data_type: str | None = None

    @property
    def name(self) -> str:
        return self.ref.column_name


@dataclass(frozen=True)
class TableMeta:
    name: str
    description: str = ""
    columns: tuple[ColumnMeta, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for col in self.columns:
            if col.ref.table_name.lower() != self.name.lower():
                raise SchemaError(f"column {col.ref} does not belong to table {self.name!r}")
            lowered = col.name.lower()
            if lowered in seen:
                raise SchemaError(f"duplicate column {col.name!r} in table {self.name!r}")
            seen.add(lowered)

    def column(self, name: str) -> ColumnMeta | None:
        lowered = name.lower()
        for col in self.columns:
            if col.name.lower() == lowered:
                return col
        return None


@dataclass(frozen=True)
class SchemaDef:
    name: str
    tables: tuple[TableMeta, ...]
    _by_name: dict[str, TableMeta] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.tables:
            raise SchemaError(f"schema {self.name!r} has no tables")
        by_name: dict[str, TableMeta] = {}
        for table in self.tables:
            lowered = table.name.lower()
            if lowered in by_name:
                raise SchemaError(f"duplicate table {table.name!r} in schema {self.name!r}")
            if not table.columns:
                raise SchemaError(f"table {table.name!r} in schema {self.name!r} has no columns")
            by_name[lowered] = table
        object.__setattr__(self, "_by_name", by_name)

    def table(self, name: str) -> TableMeta | None:
        return self._by_name.get(name.lower())

    def column(self, ref: ColumnRef) -> ColumnMeta | None:
        table = self.table(ref.table_name)
        return table.column(ref.column_name) if table else None

    def __contains__(self, ref: object) -> bool:
        return isinstance(ref, ColumnRef) and self.column(ref) is not None

    def iter_columns(self) -> Iterator[tuple[TableMeta, ColumnMeta]]:
        for table in self.tables:
            for col in table.columns:
                yield table, col

    @property
    def n_columns(self) -> int:
        return sum(len(t.columns) for t in self.tables)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tables": [
                {
                    "name": t.name,
                    "description": t.description,
                    "columns": [
                        {"name": c.name, "description": c.description}
                        | ({"data_type": c.data_type} if c.data_type is not None else {})
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ],
        }

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GroundTruth:
    """Source column -> set of target columns. An empty set means the column is NA."""

    entries: Mapping[ColumnRef, frozenset[ColumnRef]]
    source_hash: str | None = None
    target_hash: str | None = None

    def __contains__(self, ref: object) -> bool:
        return ref in self.entries

    def __getitem__(self, ref: ColumnRef) -> frozenset[ColumnRef]:
        return self.entries[ref]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def is_one_to_one(self) -> bool:
        return all(len(targets) <= 1 for targets in self.entries.values())

    def na_sources(self) -> list[ColumnRef]:
        return [src for src, targets in self.entries.items() if not targets]


def _require_str(obj: Mapping[str, Any], key: str, where: str, *, required: bool = True) -> str:
    value = obj.get(key)
    if value is None:
        if required:
            raise SchemaError(f"{where}.{key}: missing")
        return ""
    if not isinstance(value, str):
        raise SchemaError(f"{where}.{key}: expected a string, got {type(value).__name__}")
    return value


def schema_from_dict(data: Any, *, origin: str = "<schema>") -> SchemaDef:
    if not isinstance(data, dict):
        raise SchemaError(f"{origin}: top level must be an object")
    name = _require_str(data, "name", origin)
    raw_tables = data.get("tables")
    if not isinstance(raw_tables, list):
        raise SchemaError(f"{origin}.tables: expected a list")
    tables = []
    for ti, raw_table in enumerate(raw_tables):
        where = f"{origin}.tables[{ti}]"
        if not isinstance(raw_table, dict):
            raise SchemaError(f"{where}: expected an object")
        table_name = _require_str(raw_table, "name", where).strip()
        if not table_name:
            raise SchemaError(f"{where}.name: empty")
        raw_columns = raw_table.get("columns")
        if not isinstance(raw_columns, list):
            raise SchemaError(f"{where}.columns: expected a list")
        columns = []
        for ci, raw_col in enumerate(raw_columns):
            cwhere = f"{where}.columns[{ci}]"
            if not isinstance(raw_col, dict):
                raise SchemaError(f"{cwhere}: expected an object")
            col_name = _require_str(raw_col, "name", cwhere).strip()
            if not col_name:
                raise SchemaError(f"{cwhere}.name: empty")
            data_type = raw_col.get("data_type")
            if data_type is not None and not isinstance(data_type, str):
                raise SchemaError(f"{cwhere}.data_type: expected a string")
            columns.append(
                ColumnMeta(
                    ref=ColumnRef(table_name, col_name),
                    description=_require_str(raw_col, "description", cwhere, required=False),
                    data_type=data_type,
                )
            )
        tables.append(
            TableMeta(
                name=table_name,
                description=_require_str(raw_table, "description", where, required=False),
                columns=tuple(columns),
            )
        )
    return SchemaDef(name=name, tables=tuple(tables))


def load_schema(path: str | Path) -> SchemaDef:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return schema_from_dict(data, origin=str(path))


def dump_schema(schema: SchemaDef, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def _is_na(value: str) -> bool:
    return value.strip().upper() == NA_TOKEN


def load_ground_truth(path: str | Path, source: SchemaDef, target: SchemaDef) -> GroundTruth:
    """Load a ground-truth CSV and validate every reference against both schemas.

    Several rows for one source column build an m:n target set. A source
    column listed only with ``NA`` targets gets an empty set.
    """
    path = Path(path)
    entries: dict[ColumnRef, set[ColumnRef]] = {}
    na_rows: set[ColumnRef] = set()
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read ground-truth file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != GROUND_TRUTH_HEADER:
            raise SchemaError(f"{path}:1: expected header {','.join(GROUND_TRUTH_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            s_table, s_col, t_table, t_col = (cell.strip() for cell in row)
            try:
                src = ColumnRef(s_table, s_col)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            if src not in source:
                raise SchemaError(f"{path}:{lineno}: unknown source column {src}")
            targets = entries.setdefault(src, set())
            if _is_na(t_table) and _is_na(t_col):
                na_rows.add(src)
                continue
            try:
                dst = ColumnRef(t_table, t_col)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            if dst not in target:
                raise SchemaError(f"{path}:{lineno}: unknown target column {dst}")
            targets.add(dst)
    conflicting = sorted(src for src in na_rows if entries[src])
    if conflicting:
        raise SchemaError(f"{path}: source columns marked both NA and matched: {', '.join(map(str, conflicting))}")
    return GroundTruth(
        {src: frozenset(targets) for src, targets in entries.items()},
        source_hash=source.content_hash(),
        target_hash=target.content_hash(),
    )
