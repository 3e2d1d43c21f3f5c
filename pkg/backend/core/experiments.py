"""
Experiments
===========
에너지 추정치를 활용한 응용 실험

Features:
- 합/차 지배 확률 (|AA⁻¹| / |A*²| 비율 사건의 경험적 확률, 에너지 고차 모멘트)
- 랜덤 가법 기저 탐색 (Markov 에너지 필터 → 정확한 곱집합 검증)
- 거듭곱 덮기 프로파일 A, A*², ..., A*^m
- 제곱수 얇은 기저 밀도 데모 (잉여류 판정 + 두 제곱수 합 보정)
- 국소 유한군 사슬에서 층별 얇은 집합 구성
"""

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.energy import batch_energy, batch_image_size, product_set
from core.errors import SpecError, check
from core.group_core import FiniteGroup, Subset, build_group
from core.invariants import GroupInvariants
from core.sampler import McEstimate, SamplingConfig, Statistic, Universe, floyd_sample, mc_values, summarize

logger = logging.getLogger(__name__)

DEFAULT_DELTAS = (Fraction(1, 20), Fraction(1, 10), Fraction(1, 5))
POWER_LIMIT = 8
THIN_BASIS_LIMIT = 10 ** 8
CHAIN_ORDER_LIMIT = 100_000

H_FUNCTIONS: Dict[str, Callable[[int], float]] = {
    "log2": lambda n: max(1.0, math.log2(n)),
    "sqrtlog": lambda n: max(1.0, math.sqrt(math.log2(n))) if n > 1 else 1.0,
    "const": lambda n: 1.0,
}


def h_value(tag: str, n: int) -> float:
    if tag not in H_FUNCTIONS:
        raise SpecError(f"unknown h function {tag!r}; choose from {sorted(H_FUNCTIONS)}")
    return H_FUNCTIONS[tag](n)


def basis_size(n: int, h: float) -> int:
    """⌊√n·h⌋ clamped to [1, n]."""
    return min(n, max(1, int(math.floor(math.sqrt(n) * h))))


def markov_delta(h: float) -> Fraction:
    """δ = 1 + 4/h², the Markov slack with free parameter 1."""
    return 1 + Fraction(4) / Fraction(h * h).limit_denominator(10 ** 9)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=key)))


# ----------------------------------------------------------------------
# Sum / difference dominance
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DominanceRow:
    threshold: Fraction
    source: str
    delta: Optional[Fraction]
    p_diff_over_sum: float
    p_sum_over_diff: float
    bound_diff_over_sum: Optional[Fraction] = None
    bound_sum_over_diff: Optional[Fraction] = None


@dataclass
class DominanceReport:
    universe: str
    k: int
    trials: int
    seed: int
    c: Fraction
    rows: List[DominanceRow]
    max_diff_over_sum: float
    max_sum_over_diff: float
    energy_aa: McEstimate
    energy_aainv: McEstimate

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "threshold": str(row.threshold),
                "threshold_value": float(row.threshold),
                "source": row.source,
                "delta": None if row.delta is None else str(row.delta),
                "p_diff_over_sum": row.p_diff_over_sum,
                "p_sum_over_diff": row.p_sum_over_diff,
                "bound_diff_over_sum": None if row.bound_diff_over_sum is None else float(row.bound_diff_over_sum),
                "bound_sum_over_diff": None if row.bound_sum_over_diff is None else float(row.bound_sum_over_diff),
            }
            for row in self.rows
        ])

    def to_dict(self) -> Dict:
        return {
            "universe": self.universe,
            "k": self.k,
            "trials": self.trials,
            "seed": self.seed,
            "c": self.c,
            "rows": [
                {
                    "threshold": row.threshold,
                    "source": row.source,
                    "delta": row.delta,
                    "p_diff_over_sum": row.p_diff_over_sum,
                    "p_sum_over_diff": row.p_sum_over_diff,
                    "bound_diff_over_sum": row.bound_diff_over_sum,
                    "bound_sum_over_diff": row.bound_sum_over_diff,
                }
                for row in self.rows
            ],
            "max_diff_over_sum": self.max_diff_over_sum,
            "max_sum_over_diff": self.max_sum_over_diff,
            "energy_aa": self.energy_aa.to_dict(),
            "energy_aainv": self.energy_aainv.to_dict(),
        }


def default_thresholds(c: Fraction = Fraction(9, 10), invariants: Optional[GroupInvariants] = None,
                       deltas: Sequence[Fraction] = DEFAULT_DELTAS) -> List[Tuple]:
    """
    (threshold, source, δ, bound_diff_over_sum, bound_sum_over_diff) entries.

    Generic thresholds are (1/3 - δ)⁻¹ in both directions. With group
    invariants, (1/(1 + sq + cp) - δ)⁻¹ bounds |AA⁻¹|/|A*²| and
    (1/(2 + ι) - δ)⁻¹ bounds |A*²|/|AA⁻¹|.
    """
    entries = []
    for delta in deltas:
        delta = Fraction(delta)
        if 0 < delta < Fraction(1, 3):
            entries.append((1 / (Fraction(1, 3) - delta), "generic", delta, c * delta, c * delta))
    if invariants is not None:
        product_side = 1 / (1 + invariants.sq + invariants.cp)
        inverse_side = 1 / (2 + invariants.iota_density)
        for delta in deltas:
            delta = Fraction(delta)
            if 0 < delta < product_side:
                entries.append((1 / (product_side - delta), "group-products", delta, c * delta, None))
            if 0 < delta < inverse_side:
                entries.append((1 / (inverse_side - delta), "group-inverses", delta, None, c * delta))
    return entries


def _dominance_columns(universe, rows, config, delta_rows=None):
    keys = universe.product_keys(rows[:, :, None], rows[:, None, :]).reshape(rows.shape[0], -1)
    inv_right = universe.product_keys(rows[:, :, None], rows[:, None, :], invert_right=True).reshape(rows.shape[0], -1)
    inv_left = universe.product_keys(rows[:, :, None], rows[:, None, :], invert_left=True).reshape(rows.shape[0], -1)
    return np.stack([
        batch_image_size(keys),
        batch_image_size(inv_right),
        batch_energy(keys),
        batch_energy(inv_left),
    ], axis=1)


def dominance_experiment(universe: Universe, k: int, config: SamplingConfig,
                         thresholds: Optional[Sequence[Fraction]] = None, c: Fraction = Fraction(9, 10),
                         invariants: Optional[GroupInvariants] = None) -> DominanceReport:
    """Empirical P[|AA⁻¹|/|A*²| <= t] and P[|A*²|/|AA⁻¹| <= t], with energy moments."""
    if not 1 <= k <= universe.size:
        raise SpecError(f"k = {k} outside 1..{universe.size}")
    config = replace(config, k=k, statistic=Statistic.ENERGY_AA)
    entries = default_thresholds(Fraction(c), invariants)
    for t in thresholds or []:
        entries.append((Fraction(t), "custom", None, None, None))
    entries.sort(key=lambda e: e[0])

    logger.info("=" * 60)
    logger.info(f"🚀 Dominance experiment on {universe.name}: k={k}, trials={config.trials}, seed={config.seed}")
    logger.info("=" * 60)
    table = mc_values(universe, config, evaluator=_dominance_columns)
    squares = table[:, 0].astype(np.int64)
    differences = table[:, 1].astype(np.int64)

    rows = []
    for threshold, source, delta, bound_ds, bound_sd in entries:
        p, q = threshold.numerator, threshold.denominator
        p_ds = float(np.mean(differences * q <= squares * p))
        p_sd = float(np.mean(squares * q <= differences * p))
        rows.append(DominanceRow(threshold, source, delta, p_ds, p_sd, bound_ds, bound_sd))
        logger.info(f"📊 t={float(threshold):.4f} ({source}): P[diff/sum ≤ t]={p_ds:.4f}, P[sum/diff ≤ t]={p_sd:.4f}")

    for earlier, later in zip(rows, rows[1:]):
        check(earlier.p_diff_over_sum <= later.p_diff_over_sum and earlier.p_sum_over_diff <= later.p_sum_over_diff,
              "dominance probabilities are not monotone in the threshold")

    return DominanceReport(
        universe=universe.name,
        k=k,
        trials=config.trials,
        seed=config.seed,
        c=Fraction(c),
        rows=rows,
        max_diff_over_sum=float(np.max(differences / squares)),
        max_sum_over_diff=float(np.max(squares / differences)),
        energy_aa=summarize(table[:, 2], config),
        energy_aainv=summarize(table[:, 3], replace(config, statistic=Statistic.ENERGY_AAINV)),
    )


# ----------------------------------------------------------------------
# Additive basis search
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSearchResult:
    group: str
    target_epsilon: Fraction
    h_function: str
    h: float
    k: int
    delta: Fraction
    found_set: Optional[Subset]
    achieved_cover: Optional[Fraction]
    candidates_tried: int
    prefiltered: int
    budget: int
    seed: int

    @property
    def found(self) -> bool:
        return self.found_set is not None

    def to_dict(self) -> Dict:
        return {
            "group": self.group,
            "target_epsilon": self.target_epsilon,
            "h_function": self.h_function,
            "h": self.h,
            "k": self.k,
            "delta": self.delta,
            "found": self.found,
            "found_set": None if self.found_set is None else list(self.found_set.members),
            "achieved_cover": self.achieved_cover,
            "candidates_tried": self.candidates_tried,
            "prefiltered": self.prefiltered,
            "budget": self.budget,
            "seed": self.seed,
        }


def basis_search(G: FiniteGroup, h_tag: str = "log2", epsilon: Fraction = Fraction(1, 10),
                 budget: int = 10_000, seed: int = 0, prefilter: bool = True,
                 chunk: int = 64) -> BasisSearchResult:
    """
    First sampled k-subset A (k = ⌊√|G|·h(|G|)⌋) with |A*²| >= (1-ε)|G|.

    Candidates whose E(A,A) exceeds the Markov level δ·k⁴/|G| are dropped
    before the product set is taken. Absence after ``budget`` candidates is
    a result, not an error.
    """
    n = G.order
    if n < 8:
        raise SpecError("basis search needs |G| >= 8")
    epsilon = Fraction(epsilon)
    if not 0 <= epsilon <= 1:
        raise SpecError("epsilon must lie in [0, 1]")
    h = h_value(h_tag, n)
    k = basis_size(n, h)
    delta = markov_delta(h)
    use_filter = prefilter and epsilon < 1
    energy_level = delta * Fraction(k ** 4, n)
    needed = (1 - epsilon) * n

    logger.info(f"🚀 Basis search in {G.spec}: k={k}, h={h_tag} ({h:.3f}), ε={epsilon}, budget={budget}")
    tried, dropped = 0, 0
    found, cover = None, None
    for start in range(0, budget, chunk):
        stop = min(budget, start + chunk)
        rows = np.stack([floyd_sample(n, k, _stream(seed, attempt)) for attempt in range(start, stop)])
        keys = G.compose(rows[:, :, None], rows[:, None, :]).reshape(len(rows), -1)
        sizes = batch_image_size(keys)
        passes = np.ones(len(rows), dtype=bool)
        if use_filter:
            energies = batch_energy(keys)
            passes = np.array([Fraction(int(e)) <= energy_level for e in energies.tolist()])
        for offset in range(len(rows)):
            tried += 1
            if not passes[offset]:
                dropped += 1
                continue
            if int(sizes[offset]) >= needed:
                found = Subset(n, tuple(rows[offset].tolist()))
                break
        if found is not None:
            break

    if found is not None:
        square = product_set(found, found, G)
        cover = Fraction(len(square), n)
        check(len(square) >= needed, "found basis fails exact re-verification of |A*²|")
        check(len(found) ** 2 <= n * h * h + 1e-9, "found basis is larger than √|G|·h(|G|)")
        logger.info(f"✅ Found after {tried} candidates: |A|={len(found)}, |A*²|/|G| = {cover}")
    else:
        logger.warning(f"⚠️ No basis found within {budget} candidates ({dropped} dropped by the energy filter)")

    return BasisSearchResult(
        group=G.spec,
        target_epsilon=epsilon,
        h_function=h_tag,
        h=h,
        k=k,
        delta=delta,
        found_set=found,
        achieved_cover=cover,
        candidates_tried=tried,
        prefiltered=dropped,
        budget=budget,
        seed=seed,
    )


# ----------------------------------------------------------------------
# Power covers
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PowerCover:
    group: str
    group_order: int
    sizes: List[int]
    covers: bool
    first_cover: Optional[int]
    stable_from: Optional[int]
    generated_order: int

    def to_dict(self) -> Dict:
        return {
            "group": self.group,
            "group_order": self.group_order,
            "sizes": list(self.sizes),
            "covers": self.covers,
            "first_cover": self.first_cover,
            "stable_from": self.stable_from,
            "generated_order": self.generated_order,
        }


def generated_subgroup(G: FiniteGroup, A: Subset) -> np.ndarray:
    """Elements of ⟨A⟩ (positive words suffice in a finite group)."""
    members = A.as_array()
    reached = np.zeros(G.order, dtype=bool)
    reached[G.identity] = True
    frontier = np.array([G.identity])
    while len(frontier):
        step = np.unique(G.compose(frontier[:, None], members[None, :]))
        frontier = step[~reached[step]]
        reached[frontier] = True
    return np.flatnonzero(reached)


def power_cover(G: FiniteGroup, A: Subset, m: int) -> PowerCover:
    """Sizes of A, A*², ..., A*^m and whether A*^m = G."""
    if not 1 <= m <= POWER_LIMIT:
        raise SpecError(f"m must lie in 1..{POWER_LIMIT}")
    if A.universe_size != G.order or len(A) == 0:
        raise SpecError("A must be a non-empty subset of G")
    members = A.as_array()
    power = members
    sizes = [len(power)]
    for _ in range(2, m + 1):
        power = np.unique(G.compose(power[:, None], members[None, :]))
        sizes.append(len(power))
    # first exponent j with |A*^(j+1)| = |A*^j|
    stable_from = next((j + 1 for j in range(len(sizes) - 1) if sizes[j + 1] == sizes[j]), None)

    check(all(a <= b for a, b in zip(sizes, sizes[1:])), "power sizes decreased")
    generated = generated_subgroup(G, A)
    check(sizes[-1] <= len(generated), "power escapes the generated subgroup")
    first = next((j + 1 for j, size in enumerate(sizes) if size == G.order), None)
    return PowerCover(
        group=G.spec,
        group_order=G.order,
        sizes=sizes,
        covers=sizes[-1] == G.order,
        first_cover=first,
        stable_from=stable_from,
        generated_order=len(generated),
    )


# ----------------------------------------------------------------------
# Thin basis of squares
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ThinBasisReport:
    n: int
    a_count: int
    residue_count: int
    sumset_count: int

    @property
    def a_density(self) -> Fraction:
        return Fraction(self.a_count, 2 * self.n + 1)

    @property
    def residue_density(self) -> Fraction:
        return Fraction(self.residue_count, 2 * self.n + 1)

    @property
    def sumset_density(self) -> Fraction:
        return Fraction(self.sumset_count, 2 * self.n + 1)

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "a_count": self.a_count,
            "a_density": self.a_density,
            "residue_count": self.residue_count,
            "residue_density": self.residue_density,
            "sumset_count": self.sumset_count,
            "sumset_density": self.sumset_density,
        }


def difference_of_squares(m: int) -> Optional[Tuple[int, int]]:
    """(x, y) with x² - y² = m, or None when m ≡ 2 (mod 4)."""
    if m % 2:
        return (m + 1) // 2, (m - 1) // 2
    if m % 4 == 0:
        return m // 4 + 1, m // 4 - 1
    return None


def thin_basis_demo(n: int) -> ThinBasisReport:
    """Counts of A = {±m²} and of A + A inside [-n, n]."""
    if not 0 <= n <= THIN_BASIS_LIMIT:
        raise SpecError(f"n must lie in 0..{THIN_BASIS_LIMIT}")
    root = math.isqrt(n)
    a_count = 2 * root + 1

    # m ≢ 2 (mod 4) is a difference of squares; ±2, ±6, ... are the only misses
    residue_count = 2 * n + 1 - 2 * ((n + 2) // 4)
    for m in {-n, -1, 0, 1, n, n - n % 4}:
        if abs(m) <= n and m % 4 != 2:
            x, y = difference_of_squares(m)
            check(x * x - y * y == m, f"difference of squares failed for {m}")

    # |m| = x² + y² covers the remaining m ≡ 2 (mod 4)
    two_squares = np.zeros(n + 1, dtype=bool)
    squares = np.arange(root + 1, dtype=np.int64) ** 2
    for start in range(0, root + 1, 256):
        sums = squares[start:start + 256, None] + squares[None, start:]
        two_squares[sums[sums <= n]] = True
    sumset_count = residue_count + 2 * int(np.count_nonzero(two_squares[2::4]))

    report = ThinBasisReport(n=n, a_count=a_count, residue_count=residue_count, sumset_count=sumset_count)
    logger.info(f"📊 Squares in [-{n}, {n}]: A density {float(report.a_density):.5f}, "
                f"residue density {float(report.residue_density):.5f}, A+A density {float(report.sumset_density):.5f}")
    return report


# ----------------------------------------------------------------------
# Locally finite chains
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class StageRow:
    stage: int
    group_order: int
    layer_size: int
    k: int
    found: bool
    attempts: int
    layer_cover: int
    a_density: Fraction
    square_density: Fraction


@dataclass
class LocallyFiniteReport:
    chain: str
    stages: int
    h_function: str
    seed: int
    rows: List[StageRow] = field(default_factory=list)
    thin_set: List[int] = field(default_factory=list)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "stage": row.stage,
                "group_order": row.group_order,
                "layer_size": row.layer_size,
                "k": row.k,
                "found": row.found,
                "attempts": row.attempts,
                "layer_cover": row.layer_cover,
                "a_density": float(row.a_density),
                "square_density": float(row.square_density),
            }
            for row in self.rows
        ])

    def to_dict(self) -> Dict:
        return {
            "chain": self.chain,
            "stages": self.stages,
            "h_function": self.h_function,
            "seed": self.seed,
            "rows": [
                {
                    "stage": row.stage,
                    "group_order": row.group_order,
                    "layer_size": row.layer_size,
                    "k": row.k,
                    "found": row.found,
                    "attempts": row.attempts,
                    "layer_cover": row.layer_cover,
                    "a_density": row.a_density,
                    "square_density": row.square_density,
                }
                for row in self.rows
            ],
        }


def chain_masks(chain: str, stages: int) -> Tuple[FiniteGroup, List[Tuple[int, np.ndarray]]]:
    """
    The top group and the nested stage subgroups as boolean masks.

    ``ea2``: C₂^i = indices below 2^i, i = 0..stages.
    ``sym``: S_i = permutations fixing the points i..stages-1, i = 1..stages.
    """
    family = chain.strip().lower()
    if family == "ea2":
        if not 1 <= stages or 2 ** stages > CHAIN_ORDER_LIMIT:
            raise SpecError(f"ea2 chains allow stage groups up to {CHAIN_ORDER_LIMIT} elements")
        G = build_group(f"ea2:{stages}")
        index = np.arange(G.order)
        return G, [(i, index < 2 ** i) for i in range(stages + 1)]
    if family == "sym":
        if not 2 <= stages <= 8:
            raise SpecError("sym chains run from S1 up to S8")
        G = build_group(f"sym:{stages}")
        points = np.arange(stages)
        masks = [(i, np.all(G.perms[:, i:] == points[None, i:], axis=1)) for i in range(1, stages + 1)]
        return G, masks
    raise SpecError(f"unknown chain {chain!r}; use ea2 or sym")


def locally_finite_thin_set(chain: str, stages: int, h_tag: str = "const", budget: int = 200,
                            seed: int = 0) -> LocallyFiniteReport:
    """
    Thin set A = ∪ A_i with A_i drawn from the disjoint layers F_i = G_i ∖ G_(i-1).

    Each A_i has ⌊√|F_i|·h⌋ elements and |A_i*²| >= |F_i|/δ; layers whose
    search fails stay empty and are reported.
    """
    G, masks = chain_masks(chain, stages)
    report = LocallyFiniteReport(chain=chain, stages=stages, h_function=h_tag, seed=seed)

    logger.info("=" * 60)
    logger.info(f"🚀 Locally finite thin set: chain {chain} up to stage {stages}, h={h_tag}")
    logger.info("=" * 60)

    chosen: List[int] = []
    previous = None
    for stage, mask in masks:
        order = int(np.count_nonzero(mask))
        if previous is None:
            layer = np.flatnonzero(mask)
        else:
            layer = np.flatnonzero(mask & ~previous)
        previous = mask
        f = len(layer)

        h = h_value(h_tag, max(f, 1))
        k = basis_size(f, h) if f else 0
        delta = markov_delta(h)
        found, attempts, cover = False, 0, 0
        if f and order > 1:
            for attempt in range(budget):
                attempts += 1
                picks = layer[floyd_sample(f, k, _stream(seed, stage, attempt))]
                cover = len(np.unique(G.compose(picks[:, None], picks[None, :])))
                if cover * delta >= f:
                    found = True
                    chosen.extend(picks.tolist())
                    break
            if not found:
                logger.warning(f"⚠️ Stage {stage}: no layer set found within {budget} attempts")

        inside = np.array(sorted(chosen), dtype=np.int64)
        square = np.unique(G.compose(inside[:, None], inside[None, :])) if len(inside) else inside
        report.rows.append(StageRow(
            stage=stage,
            group_order=order,
            layer_size=f,
            k=k,
            found=found,
            attempts=attempts,
            layer_cover=cover,
            a_density=Fraction(len(inside), order),
            square_density=Fraction(len(square), order),
        ))
        logger.info(f"   [{stage}] |G|={order}, |F|={f}, k={k}, A density {len(inside) / order:.4f}, "
                    f"A*² density {len(square) / order:.4f}")

    report.thin_set = sorted(chosen)
    logger.info("✅ Locally finite construction finished")
    return report
