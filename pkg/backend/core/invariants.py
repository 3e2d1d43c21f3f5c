"""
Group Invariants & Q-Partition Counts
=====================================
기대 에너지 공식에 필요한 군 통계량 계산

Features:
- κ (켤레류 개수), ε (제곱 일치 쌍 / |G|), ι (involution 개수, 항등원 포함)
- 제곱근 프로파일 r(g), 중심화군 크기, cp / sq 밀도
- 삼중쌍 (a, b, c) 의 Q-partition: AA 9개 / AAINV 7개 클래스
- 부분집합 F 에 대해 네 번째 원소 d 가 F 밖으로 나가는 경우(escaped) 집계
- 전체 군에 대한 닫힌 형태(closed form) Q-카운트
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional

import numpy as np

from core.errors import CapExceededError, InvariantViolation, SpecError, check
from core.group_core import FiniteGroup, Subset
from core.settings import get_settings

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    AA = "AA"
    AAINV = "AAINV"
    ACTION = "ACTION"


# class name -> number of distinct elements among {a, b, c, d}
AA_CLASSES: Dict[str, int] = {
    "Q1_1": 3, "Q1_2": 3, "Q1_3": 4,
    "Q2": 2,
    "Q3_1": 2, "Q3_2": 3,
    "Q4_1": 2, "Q4_2": 3,
    "Q5": 1,
}
AAINV_CLASSES: Dict[str, int] = {
    "Q1_1": 3, "Q1_2": 4,
    "Q2": 2,
    "Q3_1": 2, "Q3_2": 3,
    "Q4": 2,
    "Q5": 1,
}


def class_sizes(variant: Variant) -> Dict[str, int]:
    variant = Variant(variant)
    if variant == Variant.AA:
        return AA_CLASSES
    if variant == Variant.AAINV:
        return AAINV_CLASSES
    raise SpecError("Q-partitions exist only for the AA and AAINV variants")


@dataclass(frozen=True)
class GroupInvariants:
    order: int
    kappa: int
    epsilon: int
    iota: int
    r_profile: np.ndarray = field(repr=False)
    centralizer_sizes: np.ndarray = field(repr=False)
    max_centralizer_nontrivial: int
    commuting_pairs: int
    cp: Fraction
    sq: Fraction

    @property
    def iota_density(self) -> Fraction:
        return Fraction(self.iota, self.order)

    def to_dict(self) -> Dict:
        return {
            "order": self.order,
            "kappa": self.kappa,
            "epsilon": self.epsilon,
            "iota": self.iota,
            "cp": self.cp,
            "sq": self.sq,
            "max_centralizer": self.max_centralizer_nontrivial,
        }


def compute_invariants(G: FiniteGroup) -> GroupInvariants:
    """
    κ, ε, ι, r(g), |C_G(g)|, cp and sq by direct counting.

    Conjugacy classes come from explicit orbits g⁻¹xg; centralizer sizes are
    counted directly on one representative per class.
    """
    n = G.order
    everything = G.elements()

    squares = G.compose(everything, everything)
    r = np.bincount(squares, minlength=n).astype(np.int64)
    check(int(r.sum()) == n, "square-root profile does not sum to |G|")
    sum_r2 = int(np.dot(r, r))
    if sum_r2 % n:
        raise InvariantViolation(f"{G.spec}: Σ r(g)² = {sum_r2} is not divisible by |G| = {n}")
    epsilon = sum_r2 // n
    iota = int(r[G.identity])

    if G.is_abelian:
        kappa = n
        centralizers = np.full(n, n, dtype=np.int64)
    else:
        centralizers = np.zeros(n, dtype=np.int64)
        seen = np.zeros(n, dtype=bool)
        kappa = 0
        for x in range(n):
            if seen[x]:
                continue
            orbit = np.unique(G.compose(G.compose(G.inv, x), everything))
            seen[orbit] = True
            kappa += 1
            commuting = int(np.count_nonzero(G.compose(x, everything) == G.compose(everything, x)))
            check(commuting * len(orbit) == n, f"{G.spec}: orbit-stabilizer fails at {x}")
            centralizers[orbit] = commuting

    commuting_pairs = int(centralizers.sum())
    check(commuting_pairs == kappa * n, f"{G.spec}: Σ|C_G(g)| != κ|G|")
    check(1 <= epsilon <= kappa <= n, f"{G.spec}: expected 1 <= ε <= κ <= |G|, got ε={epsilon}, κ={kappa}")

    cp = Fraction(kappa, n)
    check(Fraction(commuting_pairs, n * n) == cp, f"{G.spec}: commuting probability mismatch")

    nontrivial = np.delete(centralizers, G.identity)
    max_centralizer = int(nontrivial.max()) if len(nontrivial) else 0

    r.setflags(write=False)
    centralizers.setflags(write=False)
    return GroupInvariants(
        order=n,
        kappa=kappa,
        epsilon=epsilon,
        iota=iota,
        r_profile=r,
        centralizer_sizes=centralizers,
        max_centralizer_nontrivial=max_centralizer,
        commuting_pairs=commuting_pairs,
        cp=cp,
        sq=Fraction(epsilon, n),
    )


def max_centralizer_in_subset(G: FiniteGroup, F: Subset) -> int:
    """max over x ∈ F∖{1} of |C_G(x) ∩ F| (0 when F ⊆ {1})."""
    members = F.as_array()
    best = 0
    for x in members:
        if x == G.identity:
            continue
        commuting = int(np.count_nonzero(G.compose(x, members) == G.compose(members, x)))
        best = max(best, commuting)
    return best


# ----------------------------------------------------------------------
# Q-partition
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class QPartitionCounts:
    variant: Variant
    counts: Dict[str, int]
    universe_size: int
    escaped: Dict[str, int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.counts.values())

    def contributing(self, name: str) -> int:
        return self.counts[name] - self.escaped.get(name, 0)

    def weights(self) -> Dict[int, int]:
        """W_j: contributing triples whose quadruple has j distinct elements."""
        sizes = class_sizes(self.variant)
        w = {1: 0, 2: 0, 3: 0, 4: 0}
        for name, distinct in sizes.items():
            w[distinct] += self.contributing(name)
        return w

    def check(self) -> None:
        m = self.universe_size
        c = self.counts
        check(self.total() == m ** 3, f"Q-classes sum to {self.total()}, expected {m ** 3}")
        check(c["Q2"] == m * (m - 1), "|Q2| != |F|(|F|-1)")
        check(c["Q5"] == m, "|Q5| != |F|")
        if self.variant == Variant.AAINV:
            check(c["Q4"] == m * (m - 1), "|Q4| != |F|(|F|-1)")
        for name, value in self.escaped.items():
            check(0 <= value <= c[name], f"escaped count out of range for {name}")

    def to_dict(self) -> Dict:
        return {
            "variant": self.variant.value,
            "universe_size": self.universe_size,
            "counts": dict(self.counts),
            "escaped": {k: v for k, v in self.escaped.items() if v},
        }


def _aa_row(P: np.ndarray, diag: np.ndarray, row_has: Optional[np.ndarray], a: int):
    m = P.shape[0]
    b = np.arange(m)[:, None]
    c = np.arange(m)[None, :]
    ab = P[a, :][:, None]
    ba = P[:, a][:, None]
    ca = P[:, a][None, :]
    cc = diag[None, :]

    eq_ab = b == a
    eq_ac = c == a
    eq_bc = b == c
    distinct = ~eq_ab & ~eq_ac & ~eq_bc
    commute = ab == ba
    first = ab == ca
    second = ab == cc
    same_square = diag[a] == cc

    masks = {
        "Q1_1": distinct & first,
        "Q1_2": distinct & ~first & second,
        "Q1_3": distinct & ~first & ~second,
        "Q2": eq_ac & ~eq_ab,
        "Q3_1": eq_bc & ~eq_ab & commute,
        "Q3_2": eq_bc & ~eq_ab & ~commute,
        "Q4_1": eq_ab & ~eq_ac & same_square,
        "Q4_2": eq_ab & ~eq_ac & ~same_square,
        "Q5": eq_ab & eq_ac,
    }
    # d = c⁻¹ab lies in F iff ab occurs in row c of P
    inside = None if row_has is None else row_has[c, P[a, :][:, None]]
    return _tally(masks, inside)


def _aainv_row(R: np.ndarray, col_has: Optional[np.ndarray], a: int):
    m = R.shape[0]
    b = np.arange(m)[:, None]
    c = np.arange(m)[None, :]
    ba = R[:, a][:, None]
    ac = R[a, :][None, :]
    ab = R[a, :][:, None]

    eq_ab = b == a
    eq_ac = c == a
    eq_bc = b == c
    distinct = ~eq_ab & ~eq_ac & ~eq_bc
    returns = ba == ac
    flip = ba == ab

    masks = {
        "Q1_1": distinct & returns,
        "Q1_2": distinct & ~returns,
        "Q2": eq_ac & ~eq_ab,
        "Q3_1": eq_bc & ~eq_ab & flip,
        "Q3_2": eq_bc & ~eq_ab & ~flip,
        "Q4": eq_ab & ~eq_ac,
        "Q5": eq_ab & eq_ac,
    }
    # d = ba⁻¹c lies in F iff ba⁻¹ occurs in column c of R
    inside = None if col_has is None else col_has[c, ba]
    return _tally(masks, inside)


def _tally(masks: Dict[str, np.ndarray], inside: Optional[np.ndarray]):
    counts = {}
    escaped = {}
    for name, mask in masks.items():
        counts[name] = int(np.count_nonzero(mask))
        escaped[name] = 0 if inside is None else int(np.count_nonzero(mask & ~inside))
    return counts, escaped


def _occurrence_matrix(keys: np.ndarray, axis: int) -> np.ndarray:
    """has[i, key] = key occurs in row i (axis=1) or column i (axis=0) of ``keys``."""
    _, compact = np.unique(keys, return_inverse=True)
    compact = compact.reshape(keys.shape)
    lines = compact if axis == 1 else compact.T
    has = np.zeros((keys.shape[0], int(compact.max()) + 1), dtype=bool)
    has[np.arange(keys.shape[0])[:, None], lines] = True
    return has, compact


def q_partition_from_keys(keys: np.ndarray, variant: Variant, closed: bool,
                          threads: int = 1) -> QPartitionCounts:
    """
    Classify all triples of a finite universe given its product keys.

    ``keys[x][y]`` must identify x·y (AA) or x·y⁻¹ (AAINV) in the ambient
    group. ``closed`` means the fourth element never leaves the universe.
    """
    variant = Variant(variant)
    names = class_sizes(variant)
    m = keys.shape[0]

    lookup = None
    if closed:
        table = keys
    else:
        lookup, table = _occurrence_matrix(keys, axis=1 if variant == Variant.AA else 0)

    if variant == Variant.AA:
        diag = np.diagonal(table).copy()
        work = lambda a: _aa_row(table, diag, lookup, a)
    else:
        work = lambda a: _aainv_row(table, lookup, a)

    counts = {name: 0 for name in names}
    escaped = {name: 0 for name in names}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for row_counts, row_escaped in pool.map(work, range(m)):
            for name in names:
                counts[name] += row_counts[name]
                escaped[name] += row_escaped[name]

    result = QPartitionCounts(variant=variant, counts=counts, universe_size=m, escaped=escaped)
    result.check()
    return result


def q_partition(G: FiniteGroup, F: Optional[Subset], variant: Variant,
                cap: Optional[int] = None, threads: int = 1) -> QPartitionCounts:
    """
    Enumerate F³ and assign every triple to its class.

    Classes depend only on equalities among a, b, c and the defining relation,
    evaluated in G. For F ≠ G the escaped counts record triples whose fourth
    element leaves F.
    """
    variant = Variant(variant)
    cap = get_settings().enum_cap if cap is None else cap
    F = Subset.full(G.order) if F is None else F
    if F.universe_size != G.order:
        raise SpecError("subset universe does not match the group order")
    m = len(F)
    if m == 0:
        raise SpecError("Q-partition of an empty set")
    if m ** 3 > cap:
        raise CapExceededError("Q-partition triples", m ** 3, cap, "use the closed form for the full group")

    members = F.as_array()
    if variant == Variant.AA:
        keys = G.compose(members[:, None], members[None, :])
    else:
        keys = G.compose(members[:, None], G.inv[members][None, :])
    logger.debug(f"Enumerating {m ** 3} triples of {G.spec} ({variant.value})")
    return q_partition_from_keys(keys, variant, closed=F.is_full(), threads=threads)


def q_partition_closed_form(G: FiniteGroup, inv: GroupInvariants, variant: Variant) -> QPartitionCounts:
    """Full-group counts from |G|, κ, ε, ι alone (diagonal-corrected)."""
    variant = Variant(variant)
    n, kappa, eps, iota = G.order, inv.kappa, inv.epsilon, inv.iota
    if variant == Variant.AA:
        counts = {
            "Q1_1": n * (n - kappa),
            "Q1_2": n * (n - eps),
            "Q1_3": n * (n * n - 5 * n + 2 + eps + kappa),
            "Q2": n * (n - 1),
            "Q3_1": n * (kappa - 1),
            "Q3_2": n * (n - kappa),
            "Q4_1": n * (eps - 1),
            "Q4_2": n * (n - eps),
            "Q5": n,
        }
    elif variant == Variant.AAINV:
        counts = {
            "Q1_1": n * (n - iota),
            "Q1_2": n * (n * n - 4 * n + 2 + iota),
            "Q2": n * (n - 1),
            "Q3_1": n * (iota - 1),
            "Q3_2": n * (n - iota),
            "Q4": n * (n - 1),
            "Q5": n,
        }
    else:
        raise SpecError("closed-form Q counts exist only for AA and AAINV")
    result = QPartitionCounts(variant=variant, counts=counts, universe_size=n,
                              escaped={name: 0 for name in counts})
    result.check()
    return result


def fn_overlap_sum(G: FiniteGroup, F: Subset) -> int:
    """Σ over y ∈ F*² of |F ∩ yF| for a symmetric F; equals |F|²."""
    members = F.as_array()
    if F.universe_size != G.order:
        raise SpecError("subset universe does not match the group order")
    if set(G.inv[members].tolist()) != set(members.tolist()):
        raise SpecError("fn_overlap_sum needs a symmetric subset (closed under inverses)")
    if len(members) == 0:
        return 0

    inside = F.mask()
    products = np.unique(G.compose(members[:, None], members[None, :]))
    total = 0
    chunk = max(1, 2_000_000 // len(members))
    for start in range(0, len(products), chunk):
        y_inv = G.inv[products[start:start + chunk]]
        total += int(np.count_nonzero(inside[G.compose(y_inv[:, None], members[None, :])]))
    return total
