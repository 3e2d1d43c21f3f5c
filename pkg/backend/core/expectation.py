"""
Expected Energy
===============
균등 랜덤 k-부분집합의 기대 에너지 (정확한 유리수 계산)

Features:
- BINOMIAL_Q: Q-partition 가중치와 이항계수로 계산 (기준값, 모든 |F| 에서 정의됨)
- PRINTED_CLOSED_FORM: 출판된 닫힌 형태 그대로 (AA 는 대각 항 보정 전)
- CORRECTED_CLOSED_FORM: 대각 항을 보정한 AA 닫힌 형태
- 작용 에너지 기대값 (독립 A, Δ) 과 상·하한
- AA / AAINV 상·하한, 점근 예측값
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Dict, Optional, Union

import numpy as np

from core.errors import CapExceededError, SpecError, check
from core.group_core import FiniteGroup, GroupAction, Subset
from core.invariants import (
    GroupInvariants,
    QPartitionCounts,
    Variant,
    compute_invariants,
    q_partition,
    q_partition_closed_form,
)
from core.settings import get_settings

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]


class Method(str, Enum):
    BINOMIAL_Q = "BINOMIAL_Q"
    PRINTED_CLOSED_FORM = "PRINTED_CLOSED_FORM"
    CORRECTED_CLOSED_FORM = "CORRECTED_CLOSED_FORM"


class ConstantMode(str, Enum):
    AS_PRINTED = "AS_PRINTED"
    ORDERED_CORRECTED = "ORDERED_CORRECTED"


def falling(x: int, length: int) -> int:
    """x(x-1)...(x-length+1); 1 for length 0."""
    result = 1
    for i in range(length):
        result *= x - i
    return result


def binom(n: int, r: int) -> int:
    """C(n, r) with C(n, r) = 0 when r < 0, r > n or n < 0."""
    if n < 0 or r < 0 or r > n:
        return 0
    return comb(n, r)


@dataclass(frozen=True)
class ExpectationResult:
    value: Fraction
    k: int
    universe_size: int
    variant: Variant
    method: Method
    h: Optional[int] = None
    discrepancy: Optional[Fraction] = None

    def __post_init__(self):
        if self.variant == Variant.ACTION:
            check(self.value >= self.k * (self.h or 1), f"expected action energy {self.value} < kh")
        else:
            check(self.value >= self.k ** 2, f"expected energy {self.value} < k²")

    def to_dict(self) -> Dict:
        data = {
            "value": self.value,
            "k": self.k,
            "universe_size": self.universe_size,
            "variant": self.variant.value,
            "method": self.method.value,
        }
        if self.h is not None:
            data["h"] = self.h
        if self.discrepancy is not None:
            data["discrepancy"] = self.discrepancy
        return data


@dataclass(frozen=True)
class BoundPair:
    lower: Fraction
    upper: Fraction
    source: str
    constant_mode: ConstantMode

    def __post_init__(self):
        if self.constant_mode == ConstantMode.ORDERED_CORRECTED:
            check(self.lower <= self.upper, f"{self.source}: lower bound exceeds upper bound")

    def contains(self, value: Fraction) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> Dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "source": self.source,
            "constant_mode": self.constant_mode.value,
        }


# ----------------------------------------------------------------------
# BINOMIAL_Q
# ----------------------------------------------------------------------

def expectation_from_counts(counts: QPartitionCounts, k: int) -> Fraction:
    """C(|F|,k)⁻¹ · Σ_j C(|F|-j, k-j) · W_j."""
    n = counts.universe_size
    if not 1 <= k <= n:
        raise SpecError(f"k = {k} outside 1..{n}")
    weights = counts.weights()
    total = sum(binom(n - j, k - j) * w for j, w in weights.items())
    return Fraction(total, binom(n, k))


def expected_energy(G: FiniteGroup, k: int, variant: Variant, F: Optional[Subset] = None,
                    invariants: Optional[GroupInvariants] = None, enumerate_triples: bool = False,
                    cap: Optional[int] = None, threads: int = 1) -> ExpectationResult:
    """
    E[E(A,A)] (AA) or E[E(A,A⁻¹)] (AAINV) for a uniform k-subset A of F.

    The full group uses the closed-form Q counts unless ``enumerate_triples``;
    a proper subset is always enumerated, so the cap applies.
    """
    variant = Variant(variant)
    if F is None or F.is_full():
        if enumerate_triples:
            counts = q_partition(G, None, variant, cap=cap, threads=threads)
        else:
            counts = q_partition_closed_form(G, invariants or compute_invariants(G), variant)
    else:
        counts = q_partition(G, F, variant, cap=cap, threads=threads)
    value = expectation_from_counts(counts, k)
    return ExpectationResult(value, k, counts.universe_size, variant, Method.BINOMIAL_Q)


# ----------------------------------------------------------------------
# Closed forms
# ----------------------------------------------------------------------

def _closed_form_terms(n: int, k: int, variant: Variant, inv: GroupInvariants, printed: bool) -> Fraction:
    k2, k3, k4 = falling(k, 2), falling(k, 3), falling(k, 4)
    d1, d2, d3 = n - 1, falling(n - 1, 2), falling(n - 1, 3)
    if variant == Variant.AA:
        s = inv.epsilon + inv.kappa
        if printed:
            return (Fraction(k4 * (n * n - 5 * n + s + 3), d3)
                    + Fraction(2 * k3 * (2 * n - s - 1), d2)
                    + Fraction(k2 * (s - 1), d1)
                    + k * k)
        return (Fraction(k4 * (n * n - 5 * n + 2 + s), d3)
                + Fraction(2 * k3 * (2 * n - s), d2)
                + Fraction(k2 * (s - 2), d1)
                + k * k)
    iota = inv.iota
    return (Fraction(k4 * (n * n - 4 * n + 2 + iota), d3)
            + Fraction(2 * k3 * (n - iota), d2)
            + Fraction(k2 * (iota - 1), d1)
            + 2 * k * k - k)


def _closed_form(G: FiniteGroup, k: int, variant: Variant, invariants: Optional[GroupInvariants],
                 printed: bool) -> ExpectationResult:
    variant = Variant(variant)
    n = G.order
    if n <= 3:
        raise SpecError("closed forms need |G| >= 4 (Pochhammer denominators vanish)")
    if not 1 <= k <= n:
        raise SpecError(f"k = {k} outside 1..{n}")
    if variant not in (Variant.AA, Variant.AAINV):
        raise SpecError("closed forms exist only for AA and AAINV")
    inv = invariants or compute_invariants(G)
    value = _closed_form_terms(n, k, variant, inv, printed)
    reference = expected_energy(G, k, variant, invariants=inv).value
    discrepancy = value - reference
    method = Method.PRINTED_CLOSED_FORM if printed else Method.CORRECTED_CLOSED_FORM
    if discrepancy:
        logger.warning(
            f"⚠️ {method.value} {variant.value} on {G.spec}, k={k}: {value} differs from BINOMIAL_Q {reference} by {discrepancy}"
        )
    return ExpectationResult(value, k, n, variant, method, discrepancy=discrepancy)


def printed_closed_form(G: FiniteGroup, k: int, variant: Variant,
                        invariants: Optional[GroupInvariants] = None) -> ExpectationResult:
    """Closed forms with the coefficients as printed, plus the discrepancy against BINOMIAL_Q."""
    return _closed_form(G, k, variant, invariants, printed=True)


def corrected_closed_form(G: FiniteGroup, k: int, variant: Variant,
                          invariants: Optional[GroupInvariants] = None) -> ExpectationResult:
    """AA with Q4⁽¹⁾ = (ε-1)|G|; AAINV is unchanged."""
    return _closed_form(G, k, variant, invariants, printed=False)


def diagonal_term(n: int, k: int) -> Fraction:
    """Printed AA minus corrected AA: k⁴̲/(n-1)³̲ - 2k³̲/(n-1)²̲ + k²̲/(n-1)."""
    return (Fraction(falling(k, 4), falling(n - 1, 3))
            - Fraction(2 * falling(k, 3), falling(n - 1, 2))
            + Fraction(falling(k, 2), n - 1))


# ----------------------------------------------------------------------
# Action energy
# ----------------------------------------------------------------------

def action_expectation_bounds(k: int, h: int, phi_size: int,
                              constant_mode: ConstantMode = ConstantMode.ORDERED_CORRECTED) -> BoundPair:
    if phi_size < 2:
        raise SpecError("phi_size must be at least 2")
    constant_mode = ConstantMode(constant_mode)
    spread = 2 * (phi_size - 1) if constant_mode == ConstantMode.AS_PRINTED else phi_size - 1
    lower = Fraction(k * h)
    upper = k * h * (1 + Fraction((k - 1) * (h - 1), spread))
    return BoundPair(lower, upper, "action-independent", constant_mode)


def independent_action_expectation(action: GroupAction, k: int, h: int, F: Optional[Subset] = None,
                                   Phi: Optional[Subset] = None, cap: Optional[int] = None) -> ExpectationResult:
    """
    Exact E[E(A, Δ)] for independent uniform A ⊆ F (|A| = k) and Δ ⊆ Φ (|Δ| = h).

    Diagonal tuples (a = b, γ = δ) and off-diagonal tuples, where
    δ = (γ·a)·b⁻¹ is determined by (a, b, γ), are weighted separately.
    """
    G = action.group
    F = Subset.full(G.order) if F is None else F
    Phi = Subset.full(action.domain_size) if Phi is None else Phi
    if F.universe_size != G.order or Phi.universe_size != action.domain_size:
        raise SpecError("F must live in the group and Φ in the action domain")
    n, m = len(F), len(Phi)
    if not (1 <= k <= n and 1 <= h <= m):
        raise SpecError(f"need 1 <= k <= {n} and 1 <= h <= {m}")
    cap = get_settings().action_cap if cap is None else cap
    if n * n * m > cap:
        raise CapExceededError("independent-pair enumeration", n * n * m, cap)

    members = F.as_array()
    inv_members = G.inv[members]
    points = Phi.as_array()
    in_phi = Phi.mask()
    off_diagonal = ~np.eye(n, dtype=bool)

    same, other = 0, 0
    chunk = max(1, 5_000_000 // max(1, n * n))
    for start in range(0, m, chunk):
        gammas = points[start:start + chunk]
        moved = action.act[gammas[:, None], members[None, :]]
        deltas = action.act[moved[:, :, None], inv_members[None, None, :]]
        valid = off_diagonal[None, :, :] & in_phi[deltas]
        equal = deltas == gammas[:, None, None]
        same += int(np.count_nonzero(valid & equal))
        other += int(np.count_nonzero(valid & ~equal))

    diagonal = n * m * binom(n - 1, k - 1) * binom(m - 1, h - 1)
    crossed = binom(n - 2, k - 2) * (same * binom(m - 1, h - 1) + other * binom(m - 2, h - 2))
    value = Fraction(diagonal + crossed, binom(n, k) * binom(m, h))
    return ExpectationResult(value, k, n, Variant.ACTION, Method.BINOMIAL_Q, h=h)


# ----------------------------------------------------------------------
# Multiplicative bounds
# ----------------------------------------------------------------------

def multiplicative_bounds(k: int, f_size: int, max_centralizer: int, variant: Variant,
                          constant_mode: ConstantMode = ConstantMode.ORDERED_CORRECTED) -> BoundPair:
    """
    Upper/lower bounds for E[E(A,A)] (AA, using the largest nontrivial
    centralizer M) and E[E(A,A⁻¹)] (AAINV) over a symmetric F with |F| = f.

    ORDERED_CORRECTED charges the identity's full centralizer row:
    Q3⁽¹⁾ <= (f-1)M instead of f(M-1).
    """
    variant = Variant(variant)
    constant_mode = ConstantMode(constant_mode)
    f = f_size
    if f < 5:
        raise SpecError("multiplicative bounds need f_size >= 5")
    k2, k3, k4 = falling(k, 2), falling(k, 3), falling(k, 4)
    M = max_centralizer

    if variant == Variant.AA:
        if constant_mode == ConstantMode.AS_PRINTED:
            centralizer_upper = 2 + Fraction(M - 1, f - 1)
            centralizer_lower = Fraction(k3 * (f - M), falling(f - 1, 2))
        else:
            centralizer_upper = 2 + Fraction(M, f)
            centralizer_lower = Fraction(k3 * (f - M), f * (f - 2))
        upper = (Fraction(k4, f - 3)
                 + Fraction(k3 * (4 * f - 2), falling(f - 1, 2))
                 + k2 * centralizer_upper
                 + k)
        lower = (Fraction(k4 * (f * f - 5 * f + 2), falling(f - 1, 3))
                 + centralizer_lower
                 + k * k)
        source = "multiplicative-AA"
    elif variant == Variant.AAINV:
        upper = (Fraction(k4, f - 3)
                 + Fraction(k3 * (2 * f - 1), falling(f - 1, 2))
                 + 3 * k * k - 2 * k)
        lower = Fraction(k4 * (f * f - 4 * f + 2), falling(f - 1, 3)) + 2 * k * k - k
        source = "multiplicative-AAINV"
    else:
        raise SpecError("use action_expectation_bounds for the ACTION variant")
    return BoundPair(Fraction(lower), Fraction(upper), source, constant_mode)


# ----------------------------------------------------------------------
# Asymptotics
# ----------------------------------------------------------------------

def _density(value: Number, name: str) -> Fraction:
    frac = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    if not 0 <= frac <= 1:
        raise SpecError(f"{name} must lie in [0, 1], got {value}")
    return frac


def asymptotic_prediction(variant: Variant, k: int, cp: Number = 0, sq: Number = 0,
                          iota: Number = 0) -> Fraction:
    """
    AA:    (1 + cp + sq)k² - (cp + sq)k
    AAINV: (2 + ι)k² - (1 + ι)k
    """
    variant = Variant(variant)
    if variant == Variant.AA:
        s = _density(cp, "cp") + _density(sq, "sq")
        return (1 + s) * k * k - s * k
    if variant == Variant.AAINV:
        i = _density(iota, "iota")
        value = (2 + i) * k * k - (1 + i) * k
        alternative = (2 + i) * k * k - (1 - i) * k
        logger.debug(f"AAINV prediction {value}; the -(1-ι)k reading would give {alternative}")
        return value
    raise SpecError("asymptotic predictions exist only for AA and AAINV")


def asymptotic_from_invariants(inv: GroupInvariants, k: int, variant: Variant) -> Fraction:
    return asymptotic_prediction(variant, k, cp=inv.cp, sq=inv.sq, iota=inv.iota_density)
