"""Terminology dictionary loading, normalization, and match semantics."""

import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathwise.errors import DictDuplicateError, DictFormatError
from pathwise.terminology import (
    SENTINEL,
    empty_dictionary,
    normalize_term,
    parse_dictionary,
)

HEADER = "concept_term,system_uri,code,display\n"


def test_normalize_term():
    assert normalize_term("  Iron   Deficiency\tAnaemia ") == "iron deficiency anaemia"
    assert normalize_term("FIT") == "fit"


@given(st.text())
def test_normalize_is_idempotent(term):
    once = normalize_term(term)
    assert normalize_term(once) == once


@given(st.text(max_size=40))
def test_normalize_strips_outer_whitespace(term):
    assert normalize_term(f"  {term}\t ") == normalize_term(term)


# ascii only: one-to-one case mapping is not claimed for the full
# unicode range (e.g. 'ß'.upper() == 'SS')
@given(st.text(alphabet=string.ascii_letters + " ", max_size=40))
def test_normalize_ignores_ascii_case(term):
    assert normalize_term(term.upper()) == normalize_term(term.lower())


def test_lookup_is_normalization_insensitive(dictionary):
    a = dictionary.lookup("Iron  Deficiency Anaemia")
    b = dictionary.lookup("iron deficiency anaemia")
    assert a.matched and b.matched
    assert a.entry == b.entry
    assert a.entry.code == "87522002"


def test_unmatched_term_yields_sentinel(dictionary):
    result = dictionary.lookup("completely novel concept")
    assert not result.matched
    assert result.sentinel == SENTINEL


def test_contains_pair_is_byte_exact(dictionary):
    assert dictionary.contains_pair("http://snomed.info/sct", "87522002")
    assert not dictionary.contains_pair("http://snomed.info/sct", "87522002 ")
    assert not dictionary.contains_pair("http://snomed.info/SCT", "87522002")


def test_empty_file_is_valid_empty_dictionary():
    d = parse_dictionary(HEADER)
    assert len(d) == 0
    assert not d.lookup("anything").matched
    assert len(empty_dictionary()) == 0


def test_bad_header_rejected():
    with pytest.raises(DictFormatError) as exc:
        parse_dictionary("term,system,code\n")
    assert exc.value.code == "E_DICT_FORMAT"


def test_short_row_rejected_with_line_number():
    with pytest.raises(DictFormatError) as exc:
        parse_dictionary(HEADER + "anaemia,http://x\n")
    assert "2" in str(exc.value)


def test_blank_field_rejected():
    with pytest.raises(DictFormatError):
        parse_dictionary(HEADER + "anaemia,,123,Anaemia\n")


def test_duplicate_term_rejected_even_with_different_case():
    text = (
        HEADER
        + "anaemia,http://a,1,A\n"
        + "ANAEMIA,http://b,2,B\n"
    )
    with pytest.raises(DictDuplicateError) as exc:
        parse_dictionary(text)
    assert exc.value.code == "E_DICT_DUPLICATE"


def test_duplicate_pair_rejected():
    text = (
        HEADER
        + "anaemia,http://a,1,A\n"
        + "low iron,http://a,1,Low iron\n"
    )
    with pytest.raises(DictDuplicateError):
        parse_dictionary(text)


def test_quoted_commas_supported():
    d = parse_dictionary(HEADER + '"weight loss, unexplained",http://a,9,Weight loss\n')
    assert d.lookup("weight loss, unexplained").matched
