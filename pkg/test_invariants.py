"""
군 불변량 / Q-partition 테스트
=============================
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from core.errors import SpecError
from core.group_core import Subset, build_group
from core.invariants import (
    Variant,
    class_sizes,
    compute_invariants,
    fn_overlap_sum,
    max_centralizer_in_subset,
    q_partition,
    q_partition_closed_form,
)


@pytest.mark.parametrize("q,expected", [(2, (3, 3, 4)), (3, (8, 6, 14)), (5, (24, 8, 32))])
def test_gl2_invariants(q, expected):
    inv = compute_invariants(build_group(f"gl2:{q}"))
    assert (inv.kappa, inv.epsilon, inv.iota) == expected


def test_sym3_invariants():
    inv = compute_invariants(build_group("sym:3"))
    assert (inv.order, inv.kappa, inv.epsilon, inv.iota) == (6, 3, 3, 4)
    assert inv.cp == Fraction(1, 2)
    assert inv.sq == Fraction(1, 2)
    assert inv.iota_density == Fraction(2, 3)
    assert inv.max_centralizer_nontrivial == 3
    assert inv.commuting_pairs == 18


def test_odd_cyclic_has_unique_square_roots():
    inv = compute_invariants(build_group("cyclic:7"))
    assert (inv.kappa, inv.epsilon, inv.iota) == (7, 1, 1)
    assert list(inv.r_profile) == [1] * 7


def test_elementary_abelian_is_all_involutions():
    inv = compute_invariants(build_group("ea2:4"))
    assert inv.iota == 16
    assert inv.epsilon == 16
    assert inv.sq == 1


@pytest.mark.parametrize("spec", ["cyclic:6", "sym:3", "sym:4", "dihedral:5", "gl2:2", "ea2:3"])
@pytest.mark.parametrize("variant", [Variant.AA, Variant.AAINV])
def test_closed_form_counts_match_enumeration(spec, variant):
    G = build_group(spec)
    enumerated = q_partition(G, None, variant)
    closed = q_partition_closed_form(G, compute_invariants(G), variant)
    assert enumerated.counts == closed.counts
    assert sum(enumerated.escaped.values()) == 0


def test_proper_subset_records_escapes():
    G = build_group("sym:4")
    F = Subset.of(G.order, range(10))
    counts = q_partition(G, F, Variant.AA)
    assert counts.universe_size == 10
    assert counts.total() == 1000
    assert counts.escaped["Q1_3"] > 0
    # a = c or b = c always returns inside F
    assert counts.escaped["Q2"] == 0
    assert counts.escaped["Q5"] == 0
    assert sum(counts.weights().values()) == counts.total() - sum(counts.escaped.values())


def test_class_sizes_reject_action():
    assert sum(1 for _ in class_sizes(Variant.AA)) == 9
    assert len(class_sizes(Variant.AAINV)) == 7
    with pytest.raises(SpecError):
        class_sizes(Variant.ACTION)


DIHEDRAL5 = build_group("dihedral:5")
SYM4 = build_group("sym:4")


@pytest.mark.property_based
@settings(max_examples=50, deadline=None)
@given(members=st.sets(st.integers(0, 9), min_size=1))
def test_overlap_sum_on_symmetric_subsets(members):
    symmetric = members | {int(DIHEDRAL5.inv[x]) for x in members}
    F = Subset.of(DIHEDRAL5.order, symmetric)
    assert fn_overlap_sum(DIHEDRAL5, F) == len(F) ** 2


@pytest.mark.property_based
@settings(max_examples=25, deadline=None)
@given(members=st.sets(st.integers(0, 23), min_size=1, max_size=12))
def test_q_partition_totals(members):
    F = Subset.of(SYM4.order, members)
    for variant in (Variant.AA, Variant.AAINV):
        counts = q_partition(SYM4, F, variant)
        assert counts.total() == len(F) ** 3
        assert all(0 <= counts.escaped[name] <= counts.counts[name] for name in counts.counts)
        assert counts.counts["Q5"] == len(F)


def test_overlap_sum_needs_symmetry():
    with pytest.raises(SpecError):
        fn_overlap_sum(build_group("cyclic:5"), Subset.of(5, [1]))


def test_max_centralizer_in_subset():
    G = build_group("sym:3")
    # F = {(), (1 2), (1 2 3), (1 3 2)}: the 3-cycles commute with each other and ()
    F = Subset.of(6, [0, 2, 3, 4])
    assert max_centralizer_in_subset(G, F) == 3
    assert max_centralizer_in_subset(G, Subset.of(6, [0])) == 0
