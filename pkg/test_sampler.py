"""
샘플러 / 몬테카를로 테스트
=========================
Floyd 샘플링, 시드 재현성, 스레드 불변성, 통계량 레지스트리, 전수조사
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from core.errors import CapExceededError, SpecError
from core.expectation import expected_energy, independent_action_expectation
from core.group_core import Subset, build_group, regular_action
from core.invariants import Variant
from core.sampler import (
    FiniteUniverse,
    SamplingConfig,
    Statistic,
    brute_force_expected,
    custom_statistics,
    floyd_sample,
    mc_expected,
    sample_k_subset,
    trial_generator,
)


def test_floyd_sample_is_a_sorted_k_subset():
    rng = trial_generator(7, 0)
    for n, k in ((10, 0), (10, 1), (10, 10), (1000, 37)):
        picks = floyd_sample(n, k, rng)
        assert len(picks) == k
        assert len(set(picks.tolist())) == k
        assert list(picks) == sorted(picks)
        assert all(0 <= p < n for p in picks)
    with pytest.raises(SpecError):
        floyd_sample(3, 4, rng)


CHI_SQUARE_CRITICAL = {9: 27.877, 19: 43.820, 20: 45.315}  # upper 10^-3 quantiles


@pytest.mark.parametrize("n,k", [(5, 2), (6, 3), (7, 2)])
def test_floyd_sample_is_uniform_over_subsets(n, k):
    draws = 100_000
    rng = trial_generator(2024, n * 10 + k)
    weights = 1 << np.arange(n, dtype=np.int64)
    masks = np.fromiter((int(weights[floyd_sample(n, k, rng)].sum()) for _ in range(draws)),
                        dtype=np.int64, count=draws)
    valid = np.array([m for m in range(1 << n) if bin(m).count("1") == k])
    observed = np.bincount(masks, minlength=1 << n)
    assert observed.sum() == observed[valid].sum() == draws

    cells = math.comb(n, k)
    assert len(valid) == cells
    expected = draws / cells
    chi_square = float(((observed[valid] - expected) ** 2 / expected).sum())
    assert chi_square < CHI_SQUARE_CRITICAL[cells - 1]


def test_trial_streams_are_reproducible():
    first = sample_k_subset(50, 5, trial_generator(42, 3))
    second = sample_k_subset(50, 5, trial_generator(42, 3))
    assert first == second
    assert isinstance(first, Subset)


def test_config_validation():
    with pytest.raises(SpecError):
        SamplingConfig(seed=0, trials=0, k=2)
    with pytest.raises(SpecError):
        SamplingConfig(seed=-1, trials=10, k=2)
    with pytest.raises(SpecError):
        SamplingConfig(seed=0, trials=10, k=2, statistic=Statistic.RATIO_EVENT)
    with pytest.raises(SpecError):
        SamplingConfig(seed=0, trials=10, k=2, statistic=Statistic.ENERGY_ACTION)
    with pytest.raises(SpecError):
        SamplingConfig(seed=0, trials=10, k=2, statistic=Statistic.CUSTOM)


def test_thread_count_does_not_change_results():
    universe = FiniteUniverse(build_group("gl2:3"))
    single = mc_expected(universe, SamplingConfig(seed=9, trials=700, k=6, threads=1, chunk_size=64))
    pooled = mc_expected(universe, SamplingConfig(seed=9, trials=700, k=6, threads=4, chunk_size=64))
    assert single == pooled


def test_same_seed_same_estimate_different_seed_differs():
    universe = FiniteUniverse(build_group("sym:4"))
    a = mc_expected(universe, SamplingConfig(seed=1, trials=300, k=5))
    b = mc_expected(universe, SamplingConfig(seed=1, trials=300, k=5))
    c = mc_expected(universe, SamplingConfig(seed=2, trials=300, k=5))
    assert a.to_dict() == b.to_dict()
    assert a.raw_moments != c.raw_moments


def test_full_subset_is_deterministic():
    estimate = mc_expected(FiniteUniverse(build_group("cyclic:6")), SamplingConfig(seed=0, trials=20, k=6))
    assert estimate.mean == 216
    assert estimate.stderr == 0
    assert estimate.histogram == {216: 20}


def test_mc_estimate_agrees_with_exact_value():
    G = build_group("gl2:3")
    exact = expected_energy(G, 6, Variant.AA).value
    estimate = mc_expected(FiniteUniverse(G), SamplingConfig(seed=5, trials=20_000, k=6))
    assert estimate.within(exact, sigmas=4)
    assert estimate.min >= 36
    assert estimate.raw_moments[0] == pytest.approx(estimate.mean)


def test_action_energy_sampling():
    G = build_group("cyclic:6")
    action = regular_action(G)
    universe = FiniteUniverse(G, action=action)
    config = SamplingConfig(seed=3, trials=20_000, k=2, statistic=Statistic.ENERGY_ACTION, h=2)
    estimate = mc_expected(universe, config)
    exact = independent_action_expectation(action, 2, 2).value
    assert estimate.within(exact, sigmas=4)


def test_action_statistic_needs_an_action():
    universe = FiniteUniverse(build_group("cyclic:6"))
    with pytest.raises(SpecError):
        mc_expected(universe, SamplingConfig(seed=0, trials=5, k=2, statistic=Statistic.ENERGY_ACTION, h=2))


def test_k_larger_than_universe():
    with pytest.raises(SpecError):
        mc_expected(FiniteUniverse(build_group("cyclic:4")), SamplingConfig(seed=0, trials=5, k=5))


# ----------------------------------------------------------------------
# Brute force
# ----------------------------------------------------------------------

def test_brute_force_sym3():
    universe = FiniteUniverse(build_group("sym:3"))
    assert brute_force_expected(universe, 2) == Fraction(28, 5)
    assert brute_force_expected(universe, 2, Statistic.ENERGY_AAINV) == Fraction(36, 5)


def test_brute_force_size_statistics():
    universe = FiniteUniverse(build_group("cyclic:5"))
    assert brute_force_expected(universe, 5, Statistic.SIZE_A2) == 5
    assert brute_force_expected(universe, 5, Statistic.SIZE_AAINV) == 5
    # {x, y} ⊂ C5: |2A| = 3 and |A - A| = 3, so the ratio event always holds at c = 1
    assert brute_force_expected(universe, 2, Statistic.RATIO_EVENT, threshold=Fraction(1)) == 1


def test_custom_statistic_is_registered():
    assert "SIZE_AINVA" in custom_statistics()
    universe = FiniteUniverse(build_group("cyclic:7"))
    custom = brute_force_expected(universe, 3, Statistic.CUSTOM, custom="SIZE_AINVA")
    assert custom == brute_force_expected(universe, 3, Statistic.SIZE_AAINV)
    with pytest.raises(SpecError):
        brute_force_expected(universe, 3, Statistic.CUSTOM, custom="missing")


def test_brute_force_cap():
    universe = FiniteUniverse(build_group("sym:4"))
    with pytest.raises(CapExceededError):
        brute_force_expected(universe, 6, cap=1000)
    with pytest.raises(SpecError):
        brute_force_expected(universe, 2, Statistic.ENERGY_ACTION)


@pytest.mark.slow
def test_elementary_abelian_asymptotics():
    G = build_group("ea2:16")
    assert not G.has_table
    estimate = mc_expected(FiniteUniverse(G), SamplingConfig(seed=1, trials=100_000, k=8))
    assert estimate.within(176, sigmas=3, relative=0.02)
