import pytest
from hypothesis import given
from hypothesis import strategies as st

from colmatch.normalize import normalize_name, split_camel, tokens_of


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("LocationID", ("location", "id")),
        ("location_id", ("location", "id")),
        ("IDNumber", ("id", "number")),
        ("visit_occurrence_id2 (copy)", ("visit", "occurrence", "id", "copy")),
        ("HTTPServer2Go", ("http", "server", "go")),
        ("dob", ("dob",)),
        ("DOB", ("dob",)),
        ("patientID", ("patient", "id")),
        ("  ", ()),
        ("123_456", ()),
        ("drug.exposure-start", ("drug", "exposure", "start")),
    ],
)
def test_examples(raw, expected):
    assert tokens_of(raw) == expected


def test_split_camel_keeps_acronym_runs():
    assert split_camel("ICUStayID") == ["ICU", "Stay", "ID"]
    assert split_camel("simple") == ["simple"]


def test_text_joins_with_spaces():
    assert normalize_name("LocationID").text == "location id"
    assert not normalize_name("__")


identifiers = st.text(
    alphabet=st.sampled_from("abcXYZidID_-. ()0123456789çÉİßK"),
    max_size=30,
)


@given(identifiers)
def test_idempotent(raw):
    once = normalize_name(raw).text
    assert normalize_name(once).text == once


@given(st.text(max_size=40))
def test_output_alphabet(raw):
    for token in tokens_of(raw):
        assert token
        assert all(ch.isalpha() and not ch.isupper() for ch in token)
        assert not any(ch.isdigit() or ch.isspace() for ch in token)
