"""
에너지 엔진 테스트
=================
명시적 집합의 에너지 값과 보조정리 항등식 (hypothesis 기반)
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core.energy import (
    Normalization,
    action_energy,
    batch_energy,
    batch_image_size,
    cs_growth_bound,
    inverse_subset,
    multiplicative_energy,
    normalized_energy,
    product_set,
)
from core.errors import SpecError, UniverseMismatchError
from core.group_core import Subset, build_group, natural_action, regular_action
from core.validation import BATTERY


def test_sidon_set_energy():
    G = build_group("cyclic:100")
    A = Subset.of(100, [0, 1, 3, 7])
    report = multiplicative_energy(A, A, G)
    assert report.energy == 28
    assert report.image_size == 10
    assert len(product_set(A, A, G)) == 10
    assert report.cs_lower_bound == Fraction(64, 7)


def test_subgroup_energy_is_cubic():
    G = build_group("cyclic:12")
    H = Subset.of(12, [0, 3, 6, 9])
    report = multiplicative_energy(H, H, G)
    assert report.energy == 64
    assert report.image_size == 4


def test_histogram_is_reported_on_request():
    G = build_group("cyclic:12")
    H = Subset.of(12, [0, 6])
    data = multiplicative_energy(H, H, G).to_dict(include_histogram=True)
    assert data["representation_histogram"] == {"0": 2, "6": 2}
    assert "representation_histogram" not in multiplicative_energy(H, H, G).to_dict()


def test_regular_action_matches_multiplicative_energy():
    G = build_group("sym:4")
    A = Subset.of(24, [0, 3, 5, 11, 17])
    D = Subset.of(24, [1, 2, 8, 23])
    assert action_energy(A, D, regular_action(G)).energy == multiplicative_energy(A, D, G).energy


def test_natural_action_energy():
    G = build_group("sym:3")
    action = natural_action(G)
    A = Subset.full(6)
    D = Subset.full(3)
    report = action_energy(A, D, action)
    # every point is hit twice from each of the 3 starting points
    assert report.image_size == 3
    assert report.energy == 3 * 6 * 6


def test_universe_mismatch():
    G = build_group("cyclic:6")
    with pytest.raises(UniverseMismatchError):
        multiplicative_energy(Subset.of(6, [1]), Subset.of(7, [1]), G)
    with pytest.raises(UniverseMismatchError):
        action_energy(Subset.of(6, [1]), Subset.of(5, [1]), regular_action(G))


def test_normalized_energy_modes():
    G = build_group("cyclic:4")
    action = regular_action(G)
    A = Subset.full(4)
    assert normalized_energy(A, A, action, Normalization.GLOBAL) == 1
    assert normalized_energy(A, A, action, Normalization.LOCAL) == 1
    with pytest.raises(SpecError):
        normalized_energy(Subset.of(4, []), A, action, Normalization.LOCAL)


def test_empty_input_has_zero_energy():
    G = build_group("cyclic:4")
    report = multiplicative_energy(Subset.of(4, []), Subset.of(4, [1]), G)
    assert report.energy == 0
    with pytest.raises(SpecError):
        cs_growth_bound(report)


def test_batch_statistics():
    keys = np.array([[1, 1, 2], [3, 4, 5], [7, 7, 7]])
    assert batch_energy(keys).tolist() == [5, 3, 9]
    assert batch_image_size(keys).tolist() == [2, 3, 1]
    assert batch_energy(np.zeros((0, 3), dtype=np.int64)).tolist() == []


# ----------------------------------------------------------------------
# Identities over random subsets
# ----------------------------------------------------------------------

SYM4 = build_group("sym:4")
subsets = st.sets(st.integers(0, 23), min_size=1, max_size=12)


@pytest.mark.property_based
@settings(max_examples=60, deadline=None)
@given(members=subsets)
def test_energy_sandwich_and_growth(members):
    A = Subset.of(24, members)
    report = multiplicative_energy(A, A, SYM4)
    k = len(A)
    assert k * k <= report.energy <= k ** 3
    assert report.energy * report.image_size >= k ** 4
    assert cs_growth_bound(report) <= len(product_set(A, A, SYM4))


@pytest.mark.property_based
@settings(max_examples=60, deadline=None)
@given(members=subsets)
def test_energy_invariant_under_inversion(members):
    A = Subset.of(24, members)
    inverse = inverse_subset(A, SYM4)
    assert multiplicative_energy(inverse, inverse, SYM4).energy == multiplicative_energy(A, A, SYM4).energy


@pytest.mark.property_based
@settings(max_examples=60, deadline=None)
@given(members=subsets, g=st.integers(0, 23))
def test_energy_invariant_under_conjugation(members, g):
    A = Subset.of(24, members)
    conjugated = SYM4.compose(SYM4.compose(SYM4.inv[g], A.as_array()), g)
    B = Subset.of(24, conjugated.tolist())
    assert multiplicative_energy(B, B, SYM4).energy == multiplicative_energy(A, A, SYM4).energy


@pytest.mark.property_based
@settings(max_examples=40, deadline=None)
@given(a=subsets, d=subsets)
def test_action_energy_bounds(a, d):
    A, D = Subset.of(24, a), Subset.of(24, d)
    report = action_energy(A, D, regular_action(SYM4))
    assert len(A) * len(D) <= report.energy <= len(A) * len(D) ** 2


BATTERY_GROUPS = {spec: build_group(spec) for spec in BATTERY}


@st.composite
def translation_cases(draw):
    G = BATTERY_GROUPS[draw(st.sampled_from(BATTERY))]
    elements = st.integers(0, G.order - 1)
    a = draw(st.sets(elements, min_size=1, max_size=min(G.order, 10)))
    d = draw(st.sets(elements, min_size=1, max_size=min(G.order, 10)))
    return G, Subset.of(G.order, a), Subset.of(G.order, d), draw(elements)


@pytest.mark.property_based
@settings(max_examples=300, deadline=None)
@given(case=translation_cases())
def test_energy_invariant_under_translation(case):
    G, A, D, g = case
    action = regular_action(G)
    reference = action_energy(A, D, action).energy
    right = Subset.of(G.order, G.compose(A.as_array(), g).tolist())
    left = Subset.of(G.order, G.compose(g, D.as_array()).tolist())
    assert action_energy(right, D, action).energy == reference
    assert action_energy(A, left, action).energy == reference
    assert multiplicative_energy(right, D, G).energy == multiplicative_energy(A, D, G).energy
