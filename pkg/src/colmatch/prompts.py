"""Prompt templates and parsers for the structured LLM answers.

Templates live in ``colmatch/data/prompts`` as versioned text files. Every
answer is a numbered list between ``<tag>`` markers; reasoning outside the
markers is ignored.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from functools import cache
from importlib import resources
from string import Template

from colmatch.errors import ParseError
from colmatch.normalize import tokens_of
from colmatch.schema import ColumnMeta, ColumnRef, SchemaDef, TableMeta

NO_DESCRIPTION = "(no description)"
REPAIR_INSTRUCTION = (
    "\n\n### Repair\n"
    "Your previous answer could not be parsed. Answer again and put the list "
    "between the markers exactly as shown in the output format."
)

TASK_EXPANSION = "column_name_expansion"
TASK_CROSS_TERMINOLOGY = "cross_terminology_names"
TASK_TABLE_SELECTION = "table_selection"
TASK_RANKING = "candidate_ranking"
TASK_NEEDLE = "full_schema_ranking"

_TASK_RE = re.compile(r"^### Task: (\w+)", re.MULTILINE)
_ITEM_RE = re.compile(r"^\s*\d+\s*[.)]\s*(.+?)\s*$")


@cache
def load_template(name: str) -> str:
    return resources.files("colmatch.data.prompts").joinpath(name).read_text(encoding="utf-8")


def _or_placeholder(text: str) -> str:
    text = text.strip()
    return text if text else NO_DESCRIPTION


def _count_phrase(count: int) -> str:
    return "1 name" if count == 1 else f"{count} names"


def task_of(prompt: str) -> str | None:
    match = _TASK_RE.search(prompt)
    return match.group(1) if match else None


def forbidden_words(col: ColumnMeta, table: TableMeta) -> list[str]:
    """Normalized tokens of the table name and column name, in first-seen order."""
    words: dict[str, None] = {}
    for tok in tokens_of(table.name) + tokens_of(col.name):
        words.setdefault(tok, None)
    return list(words)


def build_expansion_prompt(col: ColumnMeta, table: TableMeta, count: int) -> str:
    if count < 1:
        raise ValueError("count must be >= 1")
    return Template(load_template("expansion_v1.txt")).substitute(
        example=load_template("oneshot_expansion_ecommerce.txt").strip(),
        table_name=table.name,
        table_description=_or_placeholder(table.description),
        column_name=col.name,
        column_description=_or_placeholder(col.description),
        count_phrase=_count_phrase(count),
    )


def build_cross_terminology_prompt(col: ColumnMeta, table: TableMeta, count: int) -> str:
    # The column description is left out on purpose: it anchors the model to
    # the source vocabulary.
    if count < 1:
        raise ValueError("count must be >= 1")
    return Template(load_template("cross_terminology_v1.txt")).substitute(
        example=load_template("oneshot_cross_terminology_ecommerce.txt").strip(),
        table_name=table.name,
        column_name=col.name,
        forbidden_words=", ".join(forbidden_words(col, table)) or "(none)",
        count_phrase=_count_phrase(count),
    )


def build_table_selection_prompt(src_table: TableMeta, src_column: ColumnMeta, tables: Iterable[TableMeta]) -> str:
    listing = "\n".join(f"- {t.name}: {_or_placeholder(t.description)}" for t in tables)
    return Template(load_template("table_selection_v1.txt")).substitute(
        table_name=src_table.name,
        table_description=_or_placeholder(src_table.description),
        column_name=src_column.name,
        table_list=listing,
    )


def build_ranking_prompt(
    src_table: TableMeta,
    src_column: ColumnMeta,
    source_names: Sequence[str],
    candidates: Sequence[tuple[ColumnRef, Sequence[str]]],
) -> str:
    listing = "\n".join(f"- {ref} | names: {'; '.join(names) or ref.column_name}" for ref, names in candidates)
    return Template(load_template("ranking_v1.txt")).substitute(
        table_name=src_table.name,
        column_name=src_column.name,
        column_description=_or_placeholder(src_column.description),
        source_names="; ".join(source_names) or src_column.name,
        candidate_list=listing,
    )


def render_schema_listing(schema: SchemaDef) -> str:
    blocks = []
    for table in schema.tables:
        lines = [f"Table {table.name}: {_or_placeholder(table.description)}"]
        lines += [f"- {col.ref}: {_or_placeholder(col.description)}" for col in table.columns]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def build_needle_prompt(src_table: TableMeta, src_column: ColumnMeta, target: SchemaDef, top_k: int) -> str:
    return Template(load_template("needle_v1.txt")).substitute(
        table_name=src_table.name,
        table_description=_or_placeholder(src_table.description),
        column_name=src_column.name,
        column_description=_or_placeholder(src_column.description),
        schema_listing=render_schema_listing(target),
        top_k=top_k,
    )


def parse_numbered_block(response: str, tag: str, *, allow_empty: bool = False) -> list[str]:
    """Items of the last ``<tag>...</tag>`` block, in order.

    Raises ParseError when the block is missing, or holds no numbered items
    and ``allow_empty`` is false.
    """
    start_marker, end_marker = f"<{tag}>", f"</{tag}>"
    end = response.rfind(end_marker)
    start = response.rfind(start_marker, 0, end if end >= 0 else None)
    if start < 0 or end < 0 or end < start:
        raise ParseError(f"answer has no <{tag}> block")
    items = []
    for line in response[start + len(start_marker) : end].splitlines():
        match = _ITEM_RE.match(line)
        if match:
            items.append(match.group(1).strip().strip("`\"'*"))
    items = [item for item in items if item]
    if not items and not allow_empty:
        raise ParseError(f"<{tag}> block holds no numbered items")
    return items


def parse_column_refs(items: Iterable[str]) -> list[ColumnRef]:
    """Turn ``TABLE.COLUMN`` items into refs; unparseable items are skipped."""
    refs = []
    for item in items:
        head = item.split()[0] if item.split() else ""
        head = head.strip("`\"'*,;:")
        table, dot, column = head.partition(".")
        if not dot or not table or not column:
            continue
        refs.append(ColumnRef(table, column))
    return refs
