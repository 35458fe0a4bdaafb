from __future__ import annotations

from pathlib import Path

import pytest

from datastory.model import Column, DataTable, DataTableSet, StoryRequest, deserialize_tables

FIXTURES = Path(__file__).parent / "fixtures"
REPO = Path(__file__).parent.parent


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def tables2() -> DataTableSet:
    return deserialize_tables((FIXTURES / "tables_2.json").read_text("utf-8"))


@pytest.fixture
def intent() -> str:
    return (FIXTURES / "intent.txt").read_text("utf-8").strip()


@pytest.fixture
def request2(tables2, intent) -> StoryRequest:
    return StoryRequest(tables2, intent)


@pytest.fixture
def small_table() -> DataTableSet:
    t = DataTable(
        "t0",
        "Approval by year",
        (Column("Year"), Column("Approval", "number", "%"), Column("Region")),
        (("2018", 41, "North"), ("2019", 44, "South"), ("2020", 39, "North")),
    )
    return DataTableSet((t,))
