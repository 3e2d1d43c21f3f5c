"""
유한군 코어 테스트
=================
스펙 파서, 곱셈표 상한, 군 공리 검사, 작용, 부분집합 파싱을 검증합니다.
"""

import numpy as np
import pytest

from core.errors import CapExceededError, SpecError
from core.group_core import (
    Subset,
    build_group,
    check_group_axioms,
    cycle_notation,
    multiply,
    natural_action,
    parse_cycles,
    parse_subset,
    regular_action,
)


@pytest.mark.parametrize("spec,order,abelian", [
    ("cyclic:6", 6, True),
    ("ea2:3", 8, True),
    ("dihedral:4", 8, False),
    ("dihedral:5", 10, False),
    ("sym:3", 6, False),
    ("sym:4", 24, False),
    ("gl2:2", 6, False),
    ("gl2:3", 48, False),
    ("prod(sym:3,cyclic:2)", 12, False),
    ("prod(cyclic:2,cyclic:3)", 6, True),
    ("perm:4:(1 2);(1 2 3 4)", 24, False),
])
def test_families_have_expected_order(spec, order, abelian):
    G = build_group(spec)
    assert G.order == order
    assert G.is_abelian == abelian
    assert G.inv[G.identity] == G.identity


def test_symmetric_elements_are_lexicographic():
    G = build_group("sym:3")
    assert G.labels == ["()", "(2 3)", "(1 2)", "(1 2 3)", "(1 3 2)", "(1 3)"]
    assert G.find("(1 2 3)") == 3
    # (1 2 3)(1 2 3) = (1 3 2)
    assert multiply(G, 3, 3) == 4


def test_find_unknown_label():
    with pytest.raises(SpecError):
        build_group("sym:3").find("(1 4)")


def test_gl2_identity_label():
    G = build_group("gl2:3")
    assert G.label(G.identity) == "[[1,0],[0,1]]"


def test_table_cap_switches_to_family_arithmetic():
    small = build_group("dihedral:6", table_cap=4)
    assert not small.has_table
    with pytest.raises(CapExceededError):
        small.mul
    full = build_group("dihedral:6")
    assert full.has_table
    g = np.arange(12)[:, None]
    h = np.arange(12)[None, :]
    assert np.array_equal(small.compose(g, h), full.mul)


def test_axioms_hold_without_table():
    check_group_axioms(build_group("gl2:5", table_cap=16))


@pytest.mark.parametrize("spec", ["foo:3", "cyclic:x", "gl2:4", "sym:9", "prod(cyclic:2)", "cyclic:0"])
def test_malformed_specs(spec):
    with pytest.raises(SpecError):
        build_group(spec)


def test_multiply_rejects_out_of_range():
    with pytest.raises(SpecError):
        multiply(build_group("cyclic:5"), 5, 1)


def test_cycle_notation_round_trip():
    assert parse_cycles("(1 2 3)", 3) == (1, 2, 0)
    assert cycle_notation((1, 2, 0)) == "(1 2 3)"
    assert cycle_notation((0, 1, 2)) == "()"
    with pytest.raises(SpecError):
        parse_cycles("(1 5)", 4)


# ----------------------------------------------------------------------
# Actions
# ----------------------------------------------------------------------

def test_regular_action_is_semiregular():
    action = regular_action(build_group("dihedral:5"))
    action.validate()
    assert action.domain_size == 10
    assert action.is_semiregular()


def test_natural_action_of_sym():
    action = natural_action(build_group("sym:4"))
    action.validate()
    assert action.domain_size == 4
    assert not action.is_semiregular()


def test_natural_action_needs_permutations():
    with pytest.raises(SpecError):
        natural_action(build_group("cyclic:4"))


# ----------------------------------------------------------------------
# Subsets
# ----------------------------------------------------------------------

def test_subset_validation():
    assert Subset.of(10, [3, 1, 3]).members == (1, 3)
    with pytest.raises(SpecError):
        Subset(10, (3, 1))
    with pytest.raises(SpecError):
        Subset.of(5, [5])
    assert Subset.full(4).is_full()
    assert list(Subset.of(6, [0, 5]).mask()) == [True, False, False, False, False, True]


def test_subset_membership_and_equality():
    A = Subset.of(100, [0, 1, 3, 7])
    assert 3 in A and 7 in A
    assert 2 not in A and 100 not in A
    assert A._lookup == frozenset({0, 1, 3, 7})
    assert A == Subset(100, (0, 1, 3, 7))
    assert hash(A) == hash(Subset(100, (0, 1, 3, 7)))
    assert "_lookup" not in repr(A)


def test_parse_subset_inline_and_file(tmp_path):
    assert parse_subset("0, 1 3", 8).members == (0, 1, 3)
    path = tmp_path / "a.txt"
    path.write_text("7\n2,4\n", encoding="utf-8")
    assert parse_subset(f"@{path}", 8).members == (2, 4, 7)
    with pytest.raises(SpecError):
        parse_subset("1,x", 8)
