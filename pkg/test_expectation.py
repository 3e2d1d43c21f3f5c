"""
기대 에너지 테스트
=================
BINOMIAL_Q, 닫힌 형태, 작용 기대값, 상·하한, 점근 예측값
"""

import itertools
from fractions import Fraction

import pytest

from core.energy import action_energy
from core.errors import SpecError
from core.expectation import (
    ConstantMode,
    Method,
    action_expectation_bounds,
    asymptotic_prediction,
    binom,
    corrected_closed_form,
    diagonal_term,
    expected_energy,
    falling,
    independent_action_expectation,
    multiplicative_bounds,
    printed_closed_form,
)
from core.group_core import Subset, build_group, natural_action, regular_action
from core.invariants import Variant, compute_invariants
from core.sampler import FiniteUniverse, Statistic, brute_force_expected
from core.validation import BATTERY, OracleBattery


def test_helpers():
    assert falling(5, 0) == 1
    assert falling(5, 3) == 60
    assert binom(4, 2) == 6
    assert binom(2, 3) == 0
    assert binom(-1, 0) == 0


def test_sym3_pair_expectations():
    G = build_group("sym:3")
    aa = expected_energy(G, 2, Variant.AA)
    assert aa.value == Fraction(28, 5)
    assert aa.method == Method.BINOMIAL_Q
    assert expected_energy(G, 2, Variant.AAINV).value == Fraction(36, 5)


def test_printed_aa_form_misses_the_diagonal():
    G = build_group("sym:3")
    printed = printed_closed_form(G, 2, Variant.AA)
    assert printed.value == 6
    assert printed.discrepancy == Fraction(2, 5)
    assert diagonal_term(6, 2) == Fraction(2, 5)
    corrected = corrected_closed_form(G, 2, Variant.AA)
    assert corrected.value == Fraction(28, 5)
    assert corrected.discrepancy == 0


@pytest.mark.parametrize("spec", ["cyclic:8", "sym:4", "dihedral:5", "gl2:3"])
def test_corrected_forms_match_binomial_q(spec):
    G = build_group(spec)
    inv = compute_invariants(G)
    for k in range(1, 7):
        assert corrected_closed_form(G, k, Variant.AA, inv).discrepancy == 0
        assert printed_closed_form(G, k, Variant.AAINV, inv).discrepancy == 0
        printed = printed_closed_form(G, k, Variant.AA, inv)
        assert printed.discrepancy == diagonal_term(G.order, k)


def test_closed_forms_need_four_elements():
    with pytest.raises(SpecError):
        printed_closed_form(build_group("cyclic:3"), 2, Variant.AA)


@pytest.mark.parametrize("spec", ["cyclic:5", "sym:3", "dihedral:4", "ea2:3"])
@pytest.mark.parametrize("variant,statistic", [
    (Variant.AA, Statistic.ENERGY_AA),
    (Variant.AAINV, Statistic.ENERGY_AAINV),
])
def test_binomial_q_matches_brute_force(spec, variant, statistic):
    G = build_group(spec)
    universe = FiniteUniverse(G)
    for k in range(1, G.order + 1):
        exact = expected_energy(G, k, variant, enumerate_triples=True).value
        assert exact == brute_force_expected(universe, k, statistic)


@pytest.mark.parametrize("spec", BATTERY)
@pytest.mark.parametrize("variant", [Variant.AA, Variant.AAINV])
def test_expected_energy_strictly_increasing_in_k(spec, variant):
    G = build_group(spec)
    inv = compute_invariants(G)
    values = [expected_energy(G, k, variant, invariants=inv).value for k in range(1, G.order + 1)]
    assert values[0] == 1
    assert values[-1] == G.order ** 3
    assert all(a < b for a, b in zip(values, values[1:]))


def test_battery_checks_translation_and_monotonicity():
    battery = OracleBattery(groups=["sym:3", "dihedral:4"], seed=5)
    for spec in battery.groups:
        battery.check_translation(spec)
        battery.check_monotonicity(spec)
    names = {check.name for check in battery.checks}
    assert names == {"translation-invariance", "expectation-increasing"}
    assert len(battery.checks) == 6
    assert all(check.passed for check in battery.checks)


def test_extreme_sizes():
    G = build_group("gl2:2")
    for variant in (Variant.AA, Variant.AAINV):
        assert expected_energy(G, 1, variant).value == 1
        assert expected_energy(G, G.order, variant).value == G.order ** 3
    with pytest.raises(SpecError):
        expected_energy(G, 7, Variant.AA)


def test_subset_universe_matches_brute_force():
    G = build_group("sym:4")
    F = Subset.of(G.order, range(10))
    universe = FiniteUniverse(G, F)
    for variant, statistic in ((Variant.AA, Statistic.ENERGY_AA), (Variant.AAINV, Statistic.ENERGY_AAINV)):
        assert expected_energy(G, 3, variant, F=F).value == brute_force_expected(universe, 3, statistic)


# ----------------------------------------------------------------------
# Action energy
# ----------------------------------------------------------------------

def test_cyclic6_attains_the_ordered_bound():
    value = independent_action_expectation(regular_action(build_group("cyclic:6")), 2, 2).value
    assert value == Fraction(24, 5)
    ordered = action_expectation_bounds(2, 2, 6, ConstantMode.ORDERED_CORRECTED)
    printed = action_expectation_bounds(2, 2, 6, ConstantMode.AS_PRINTED)
    assert ordered.lower == 4
    assert ordered.upper == value
    assert printed.upper == Fraction(22, 5)
    assert not printed.contains(value)


def _brute_action(action, k, h):
    total, count = 0, 0
    for a in itertools.combinations(range(action.group.order), k):
        for d in itertools.combinations(range(action.domain_size), h):
            total += action_energy(Subset(action.group.order, a), Subset(action.domain_size, d), action).energy
            count += 1
    return Fraction(total, count)


@pytest.mark.parametrize("spec,kind,k,h", [
    ("cyclic:5", "regular", 2, 2),
    ("dihedral:3", "regular", 3, 2),
    ("sym:3", "natural", 2, 2),
    ("sym:3", "natural", 3, 1),
])
def test_independent_action_expectation_matches_brute_force(spec, kind, k, h):
    G = build_group(spec)
    action = natural_action(G) if kind == "natural" else regular_action(G)
    assert independent_action_expectation(action, k, h).value == _brute_action(action, k, h)


def test_action_bounds_need_two_points():
    with pytest.raises(SpecError):
        action_expectation_bounds(2, 1, 1)


# ----------------------------------------------------------------------
# Multiplicative bounds / asymptotics
# ----------------------------------------------------------------------

def test_multiplicative_bounds_bracket_sym3():
    inv = compute_invariants(build_group("sym:3"))
    aa = multiplicative_bounds(2, 6, inv.max_centralizer_nontrivial, Variant.AA)
    assert (aa.lower, aa.upper) == (4, 7)
    assert aa.contains(Fraction(28, 5))
    printed = multiplicative_bounds(2, 6, 3, Variant.AA, ConstantMode.AS_PRINTED)
    assert (printed.lower, printed.upper) == (4, Fraction(34, 5))
    aainv = multiplicative_bounds(2, 6, inv.max_centralizer_nontrivial, Variant.AAINV)
    assert (aainv.lower, aainv.upper) == (6, 8)
    assert aainv.contains(Fraction(36, 5))
    single = multiplicative_bounds(1, 6, 3, Variant.AA)
    assert single.lower == single.upper == 1


def test_multiplicative_bounds_need_five_elements():
    with pytest.raises(SpecError):
        multiplicative_bounds(2, 4, 2, Variant.AA)


def test_asymptotic_predictions():
    assert asymptotic_prediction(Variant.AA, 10, cp=1, sq=0) == 190
    assert asymptotic_prediction(Variant.AAINV, 10, iota=0) == 190
    assert asymptotic_prediction(Variant.AA, 2, cp=Fraction(1, 2), sq=Fraction(1, 2)) == 6
    assert asymptotic_prediction(Variant.AAINV, 2, iota=Fraction(2, 3)) == Fraction(22, 3)
    with pytest.raises(SpecError):
        asymptotic_prediction(Variant.AA, 2, cp=2)
