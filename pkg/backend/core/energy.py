"""
Energy Engine
=============
작용 에너지 / 곱셈 에너지 / 곱집합 / 정규화 에너지 계산

Features:
- E(A, Δ) = #{(a, b, γ, δ) : γ·a = δ·b} 를 표현 히스토그램 Σ r(ω)² 로 계산
- 작은 입력은 사중쌍 직접 비교로 자체 검증
- Cauchy–Schwarz 성장 하한 |Δ·A| ≥ |A|²|Δ|² / E
- 배치(trial × key) 행렬에 대한 벡터화된 에너지 / 이미지 크기
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict

import numpy as np

from core.errors import SpecError, UniverseMismatchError, check
from core.group_core import FiniteGroup, GroupAction, Subset

logger = logging.getLogger(__name__)

QUARTIC_SELF_CHECK = 1000


class Normalization(str, Enum):
    GLOBAL = "GLOBAL"
    LOCAL = "LOCAL"


@dataclass(frozen=True)
class EnergyReport:
    energy: int
    image_size: int
    a_size: int
    d_size: int
    cs_lower_bound: Fraction
    representation_histogram: Dict[int, int] = field(repr=False)

    def to_dict(self, include_histogram: bool = False) -> Dict:
        data = {
            "energy": self.energy,
            "image_size": self.image_size,
            "a_size": self.a_size,
            "d_size": self.d_size,
            "cs_lower_bound": self.cs_lower_bound,
        }
        if include_histogram:
            data["representation_histogram"] = {str(k): v for k, v in self.representation_histogram.items()}
        return data


# ----------------------------------------------------------------------
# Batched histogram statistics
# ----------------------------------------------------------------------

def _run_starts(keys: np.ndarray):
    ordered = np.sort(keys, axis=1)
    starts = np.ones(ordered.shape, dtype=bool)
    starts[:, 1:] = ordered[:, 1:] != ordered[:, :-1]
    return starts


def batch_energy(keys: np.ndarray) -> np.ndarray:
    """Σ r² of the key histogram of every row (rows must be non-empty)."""
    keys = np.asarray(keys)
    rows = keys.shape[0]
    if rows == 0:
        return np.zeros(0, dtype=np.int64)
    starts = _run_starts(keys)
    run_id = np.cumsum(starts.ravel()) - 1
    lengths = np.bincount(run_id).astype(np.int64)
    runs_per_row = starts.sum(axis=1)
    offsets = np.concatenate(([0], np.cumsum(runs_per_row)[:-1]))
    return np.add.reduceat(lengths * lengths, offsets)


def batch_image_size(keys: np.ndarray) -> np.ndarray:
    """Number of distinct keys in every row."""
    keys = np.asarray(keys)
    if keys.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return _run_starts(keys).sum(axis=1).astype(np.int64)


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------

def energy_report_from_points(points: np.ndarray, a_size: int, d_size: int,
                              semiregular: bool = False) -> EnergyReport:
    """
    Build an EnergyReport from the |Δ|×|A| array of points γ·a.

    Checks the histogram identities, the sandwich bounds and the
    Cauchy–Schwarz inequality; inputs with |A||Δ| <= 1000 are also counted
    by direct pair comparison.
    """
    flat = np.asarray(points).ravel()
    check(len(flat) == a_size * d_size, "point array does not have |A||Δ| entries")
    if len(flat) == 0:
        return EnergyReport(0, 0, a_size, d_size, Fraction(0), {})

    values, counts = np.unique(flat, return_counts=True)
    counts = counts.astype(np.int64)
    energy = int(np.dot(counts, counts))
    image = len(values)
    pairs = a_size * d_size

    check(int(counts.sum()) == pairs, "Σ r(ω) != |A||Δ|")
    check(pairs <= energy <= a_size * pairs, f"energy {energy} outside [|A||Δ|, |A|²|Δ|]")
    if semiregular:
        check(energy <= pairs * d_size, f"energy {energy} exceeds |A||Δ|² for a semiregular action")
    check(energy * image >= pairs * pairs, "Cauchy–Schwarz growth bound violated")
    if pairs <= QUARTIC_SELF_CHECK:
        quartic = int(np.count_nonzero(flat[:, None] == flat[None, :]))
        check(quartic == energy, f"histogram energy {energy} != direct count {quartic}")

    histogram = {int(v): int(c) for v, c in zip(values.tolist(), counts.tolist())}
    return EnergyReport(
        energy=energy,
        image_size=image,
        a_size=a_size,
        d_size=d_size,
        cs_lower_bound=Fraction(pairs * pairs, energy),
        representation_histogram=histogram,
    )


def action_energy(A: Subset, D: Subset, action: GroupAction) -> EnergyReport:
    """E(A, Δ) for A ⊆ G and Δ ⊆ Ω under ``action``."""
    if A.universe_size != action.group.order:
        raise UniverseMismatchError("A must be a subset of the acting group")
    if D.universe_size != action.domain_size:
        raise UniverseMismatchError("Δ must be a subset of the action domain")
    points = action.act[D.as_array()[:, None], A.as_array()[None, :]]
    return energy_report_from_points(points, len(A), len(D), semiregular=action.is_semiregular())


def multiplicative_energy(A: Subset, B: Subset, G: FiniteGroup) -> EnergyReport:
    """E(A, B) under the right regular action: #{(a, b, c, d) : c·a = d·b, c, d ∈ B}."""
    for S in (A, B):
        if S.universe_size != G.order:
            raise UniverseMismatchError(f"subset universe {S.universe_size} != |G| = {G.order}")
    points = G.compose(B.as_array()[:, None], A.as_array()[None, :])
    return energy_report_from_points(points, len(A), len(B), semiregular=True)


def product_set(A: Subset, B: Subset, G: FiniteGroup) -> Subset:
    """AB = {ab : a ∈ A, b ∈ B}."""
    for S in (A, B):
        if S.universe_size != G.order:
            raise UniverseMismatchError(f"subset universe {S.universe_size} != |G| = {G.order}")
    products = np.unique(G.compose(A.as_array()[:, None], B.as_array()[None, :]))
    return Subset(G.order, tuple(products.tolist()))


def inverse_subset(A: Subset, G: FiniteGroup) -> Subset:
    if A.universe_size != G.order:
        raise UniverseMismatchError(f"subset universe {A.universe_size} != |G| = {G.order}")
    return Subset.of(G.order, G.inv[A.as_array()].tolist())


def normalized_energy(A: Subset, D: Subset, action: GroupAction,
                      mode: Normalization = Normalization.GLOBAL) -> Fraction:
    """E/(|G|²|Ω|) in GLOBAL mode, E/(|A|²|Δ|) in LOCAL mode."""
    report = action_energy(A, D, action)
    mode = Normalization(mode)
    if mode == Normalization.GLOBAL:
        return Fraction(report.energy, action.group.order ** 2 * action.domain_size)
    if len(A) == 0 or len(D) == 0:
        raise SpecError("LOCAL normalization needs non-empty A and Δ")
    return Fraction(report.energy, len(A) ** 2 * len(D))


def cs_growth_bound(report: EnergyReport) -> Fraction:
    """|A|²|Δ|²/E, a lower bound for |Δ·A|."""
    if report.energy == 0:
        raise SpecError("growth bound undefined for zero energy (empty input)")
    return Fraction((report.a_size * report.d_size) ** 2, report.energy)
