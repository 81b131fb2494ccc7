import pytest

from colmatch import prompts
from colmatch.errors import ParseError
from colmatch.schema import ColumnRef

from conftest import make_schema, make_table

PATIENTS = make_table("PATIENTS", {"DOB": "Date of birth", "GNDR": ""}, "One row per patient")


def test_expansion_prompt_fields():
    text = prompts.build_expansion_prompt(PATIENTS.columns[0], PATIENTS, 3)
    assert prompts.task_of(text) == prompts.TASK_EXPANSION
    assert "Table name: PATIENTS" in text
    assert "Table description: One row per patient" in text
    assert "Column description: Date of birth" in text
    assert "exactly 3 names" in text
    assert "ORD_HDR" in text  # one-shot example is inlined


def test_empty_description_gets_placeholder():
    text = prompts.build_expansion_prompt(PATIENTS.columns[1], PATIENTS, 1)
    assert f"Column description: {prompts.NO_DESCRIPTION}" in text
    assert "exactly 1 name\n" in text or "exactly 1 name " in text


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        prompts.build_expansion_prompt(PATIENTS.columns[0], PATIENTS, 0)
    with pytest.raises(ValueError):
        prompts.build_cross_terminology_prompt(PATIENTS.columns[0], PATIENTS, 0)


def test_cross_terminology_prompt_lists_forbidden_words_and_hides_description():
    text = prompts.build_cross_terminology_prompt(PATIENTS.columns[0], PATIENTS, 3)
    assert "Forbidden words: patients, dob" in text
    assert "Date of birth" not in text
    assert prompts.forbidden_words(PATIENTS.columns[0], PATIENTS) == ["patients", "dob"]


def test_forbidden_words_dedup_in_order():
    table = make_table("visit_visit", {"VisitID": ""})
    assert prompts.forbidden_words(table.columns[0], table) == ["visit", "id"]


def test_table_selection_prompt_lists_tables():
    person = make_table("PERSON", {"person_id": ""}, "People")
    visit = make_table("VISIT", {"visit_id": ""})
    text = prompts.build_table_selection_prompt(PATIENTS, PATIENTS.columns[0], [person, visit])
    assert "- PERSON: People" in text
    assert f"- VISIT: {prompts.NO_DESCRIPTION}" in text
    assert "Source column name: DOB" in text


def test_ranking_prompt_candidate_lines():
    text = prompts.build_ranking_prompt(
        PATIENTS, PATIENTS.columns[0], ["date of birth"], [(ColumnRef("PERSON", "birth_dttm"), ["birth date time"])]
    )
    assert "- PERSON.birth_dttm | names: birth date time" in text
    assert "Alternative names: date of birth" in text


def test_needle_prompt_holds_whole_schema():
    target = make_schema("t", make_table("A", {"x": "ex"}), make_table("B", {"y": ""}))
    text = prompts.build_needle_prompt(PATIENTS, PATIENTS.columns[0], target, 5)
    assert "- A.x: ex" in text and "- B.y:" in text
    assert "the 5 best target columns" in text


def test_parse_numbered_block_takes_last_block():
    text = "<names>\n1. draft\n</names>\nfinal:\n<names>\n1. alpha\n2) `beta`\n  3. gamma  \nnot numbered\n</names>"
    assert prompts.parse_numbered_block(text, "names") == ["alpha", "beta", "gamma"]


@pytest.mark.parametrize("text", ["nothing here", "<names>\n</names>", "<names>1. unterminated"])
def test_parse_numbered_block_errors(text):
    with pytest.raises(ParseError):
        prompts.parse_numbered_block(text, "names")


def test_parse_numbered_block_allow_empty():
    assert prompts.parse_numbered_block("<tables>\n</tables>", "tables", allow_empty=True) == []


def test_parse_column_refs_skips_junk():
    refs = prompts.parse_column_refs(["PERSON.person_id - the key", "nonsense", "VISIT.", "`DRUG.qty`,"])
    assert refs == [ColumnRef("PERSON", "person_id"), ColumnRef("DRUG", "qty")]
