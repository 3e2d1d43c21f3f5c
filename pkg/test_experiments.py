"""
실험 드라이버 테스트
===================
지배 확률, 기저 탐색, 거듭제곱 덮기, 제곱수 얇은 기저, 국소 유한 사슬
"""

import math
import tracemalloc
from fractions import Fraction

import pytest

from core.errors import SpecError
from core.experiments import (
    basis_search,
    basis_size,
    chain_masks,
    default_thresholds,
    difference_of_squares,
    dominance_experiment,
    h_value,
    locally_finite_thin_set,
    markov_delta,
    power_cover,
    thin_basis_demo,
)
from core.group_core import Subset, build_group
from core.invariants import compute_invariants
from core.sampler import FiniteUniverse, SamplingConfig


def test_helpers():
    assert h_value("const", 1000) == 1.0
    assert h_value("log2", 1) == 1.0
    assert markov_delta(2) == 2
    assert basis_size(4, 100) == 4
    assert basis_size(100, 0.01) == 1
    assert basis_size(100, 1) == 10
    with pytest.raises(SpecError):
        h_value("bogus", 10)


# ----------------------------------------------------------------------
# Dominance
# ----------------------------------------------------------------------

def test_generic_thresholds():
    entries = default_thresholds()
    assert [e[1] for e in entries] == ["generic"] * 3
    assert entries[0][0] == Fraction(60, 17)
    assert entries[0][3] == Fraction(9, 200)


def test_dominance_experiment():
    G = build_group("sym:4")
    inv = compute_invariants(G)
    report = dominance_experiment(
        FiniteUniverse(G), 5, SamplingConfig(seed=4, trials=300, k=5),
        thresholds=[Fraction(1000)], invariants=inv,
    )
    sources = {row.source for row in report.rows}
    assert {"generic", "group-products", "group-inverses", "custom"} <= sources
    for row in report.rows:
        assert 0 <= row.p_diff_over_sum <= 1
        assert 0 <= row.p_sum_over_diff <= 1
    custom = next(row for row in report.rows if row.source == "custom")
    assert custom.p_diff_over_sum == 1.0
    assert custom.p_sum_over_diff == 1.0
    assert report.energy_aa.trials == 300
    assert report.energy_aa.min >= 25
    assert len(report.to_dataframe()) == len(report.rows)


def test_dominance_rejects_bad_k():
    with pytest.raises(SpecError):
        dominance_experiment(FiniteUniverse(build_group("cyclic:5")), 6, SamplingConfig(seed=0, trials=5, k=2))


# ----------------------------------------------------------------------
# Basis search
# ----------------------------------------------------------------------

def test_basis_search_in_sym5():
    result = basis_search(build_group("sym:5"), "log2", Fraction(1, 10), budget=200, seed=0)
    assert result.k == 75
    assert result.found
    assert result.achieved_cover >= Fraction(9, 10)
    assert len(result.found_set) == 75
    assert result.candidates_tried <= 200
    assert result.to_dict()["found"] is True


def test_basis_search_without_target():
    result = basis_search(build_group("cyclic:16"), "const", Fraction(1), budget=50)
    assert result.found
    assert result.candidates_tried == 1
    assert result.prefiltered == 0


def test_basis_search_needs_eight_elements():
    with pytest.raises(SpecError):
        basis_search(build_group("cyclic:4"))
    with pytest.raises(SpecError):
        basis_search(build_group("cyclic:9"), epsilon=Fraction(3, 2))


# ----------------------------------------------------------------------
# Power covers
# ----------------------------------------------------------------------

def test_power_cover_sym3():
    G = build_group("sym:3")
    A = Subset.of(6, [0, 2, 3])
    two = power_cover(G, A, 2)
    assert two.sizes == [3, 6]
    assert two.covers
    assert two.first_cover == 2
    three = power_cover(G, A, 3)
    assert three.sizes == [3, 6, 6]
    assert three.stable_from == 2
    assert three.generated_order == 6


def test_power_cover_inside_a_subgroup():
    G = build_group("cyclic:12")
    cover = power_cover(G, Subset.of(12, [0, 4]), 4)
    assert cover.sizes == [2, 3, 3, 3]
    assert not cover.covers
    assert cover.first_cover is None
    assert cover.generated_order == 3


def test_power_cover_limits():
    G = build_group("sym:3")
    with pytest.raises(SpecError):
        power_cover(G, Subset.of(6, [0]), 9)
    with pytest.raises(SpecError):
        power_cover(G, Subset.of(6, []), 2)


# ----------------------------------------------------------------------
# Thin basis of squares
# ----------------------------------------------------------------------

def test_difference_of_squares():
    assert difference_of_squares(7) == (4, 3)
    assert difference_of_squares(8) == (3, 1)
    assert difference_of_squares(6) is None
    for m in range(-40, 41):
        pair = difference_of_squares(m)
        if pair is not None:
            assert pair[0] ** 2 - pair[1] ** 2 == m


def test_thin_basis_small():
    report = thin_basis_demo(4)
    assert (report.a_count, report.residue_count, report.sumset_count) == (5, 7, 9)
    assert report.sumset_density == 1


def test_thin_basis_counts_match_enumeration():
    for n in range(0, 80):
        squares = [s * s for s in range(math.isqrt(n) + 1)]
        a = {sign * s for s in squares for sign in (1, -1)}
        sums = {x + y for x in a for y in a}
        residues = [m for m in range(-n, n + 1) if difference_of_squares(m) is not None]
        report = thin_basis_demo(n)
        assert report.a_count == len(a)
        assert report.residue_count == len(residues)
        assert report.sumset_count == sum(1 for m in range(-n, n + 1) if m in sums)


def test_thin_basis_memory_stays_flat():
    tracemalloc.start()
    try:
        report = thin_basis_demo(10 ** 6)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    assert report.residue_count == 2 * 10 ** 6 + 1 - 2 * 250_000
    assert peak < 10 * 2 ** 20


def test_thin_basis_large():
    report = thin_basis_demo(100_000)
    assert report.a_count == 633
    assert report.residue_density > Fraction(3, 4)
    assert report.residue_count <= report.sumset_count <= 2 * 100_000 + 1
    with pytest.raises(SpecError):
        thin_basis_demo(-1)


# ----------------------------------------------------------------------
# Locally finite chains
# ----------------------------------------------------------------------

def test_ea2_chain_gives_a_thin_set():
    report = locally_finite_thin_set("ea2", 12, "const", budget=200, seed=0)
    assert len(report.thin_set) == 149
    assert all(row.found for row in report.rows[1:])
    assert report.rows[-1].group_order == 4096
    assert report.rows[-1].a_density < Fraction(1, 20)
    assert len(set(report.thin_set)) == len(report.thin_set)


def test_sym_chain_stages():
    G, masks = chain_masks("sym", 4)
    assert G.order == 24
    assert [int(mask.sum()) for _, mask in masks] == [1, 2, 6, 24]
    report = locally_finite_thin_set("sym", 4, "const", budget=50)
    assert [row.group_order for row in report.rows] == [1, 2, 6, 24]
    assert [row.layer_size for row in report.rows] == [1, 1, 4, 18]


def test_unknown_chain():
    with pytest.raises(SpecError):
        chain_masks("heisenberg", 3)
    with pytest.raises(SpecError):
        chain_masks("sym", 9)
