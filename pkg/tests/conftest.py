from __future__ import annotations

from importlib import resources

import pytest

from colmatch.mock import MockEmbedder, MockLLM
from colmatch.schema import ColumnMeta, ColumnRef, SchemaDef, TableMeta, load_ground_truth, load_schema

DEMO = resources.files("colmatch.data.demo")


def make_table(name: str, columns: dict[str, str], description: str = "") -> TableMeta:
    return TableMeta(
        name=name,
        description=description,
        columns=tuple(ColumnMeta(ColumnRef(name, col), desc) for col, desc in columns.items()),
    )


def make_schema(name: str, *tables: TableMeta) -> SchemaDef:
    return SchemaDef(name=name, tables=tables)


@pytest.fixture(scope="session")
def demo_source() -> SchemaDef:
    return load_schema(DEMO / "source_schema.json")


@pytest.fixture(scope="session")
def demo_target() -> SchemaDef:
    return load_schema(DEMO / "target_schema.json")


@pytest.fixture(scope="session")
def demo_gt(demo_source, demo_target):
    return load_ground_truth(DEMO / "ground_truth.csv", demo_source, demo_target)


@pytest.fixture
def llm() -> MockLLM:
    return MockLLM()


@pytest.fixture
def embedder() -> MockEmbedder:
    return MockEmbedder(64)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
