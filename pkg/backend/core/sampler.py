"""
Subset Sampler & Monte Carlo Engine
===================================
균등 k-부분집합 샘플링, 시드 고정 몬테카를로 추정, 전수조사 오라클

Features:
- Floyd 알고리즘 기반 비복원 k-부분집합 샘플링 (O(k) 메모리)
- trial 별 독립 RNG 스트림: PCG64(SeedSequence(seed, spawn_key=(trial,)))
- 스레드 수와 무관하게 동일한 결과 (고정 chunk 경계 + 순서 보존 병합)
- 통계량 레지스트리 (ENERGY_AA, ENERGY_AAINV, ENERGY_ACTION, SIZE_A2, SIZE_AAINV, RATIO_EVENT, CUSTOM)
- 사전식 순서 전수조사 (정확한 유리수 평균)
"""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.energy import batch_energy, batch_image_size
from core.errors import CapExceededError, SpecError
from core.group_core import FiniteGroup, GroupAction, Subset
from core.settings import get_settings

logger = logging.getLogger(__name__)

BRUTE_FORCE_BATCH = 4096


class Statistic(str, Enum):
    ENERGY_AA = "ENERGY_AA"
    ENERGY_AAINV = "ENERGY_AAINV"
    ENERGY_ACTION = "ENERGY_ACTION"
    SIZE_A2 = "SIZE_A2"
    SIZE_AAINV = "SIZE_AAINV"
    RATIO_EVENT = "RATIO_EVENT"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class SamplingConfig:
    seed: int
    trials: int
    k: int
    statistic: Statistic = Statistic.ENERGY_AA
    threshold: Optional[Fraction] = None
    h: Optional[int] = None
    custom: Optional[str] = None
    threads: int = 1
    chunk_size: int = 1024
    histogram_limit: int = 256

    def __post_init__(self):
        if self.trials < 1:
            raise SpecError("trials must be at least 1")
        if self.k < 0:
            raise SpecError("k must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise SpecError("seed must be a 64-bit non-negative integer")
        statistic = Statistic(self.statistic)
        if statistic == Statistic.RATIO_EVENT and self.threshold is None:
            raise SpecError("RATIO_EVENT needs a threshold c")
        if statistic == Statistic.ENERGY_ACTION and not self.h:
            raise SpecError("ENERGY_ACTION needs the Δ size h")
        if statistic == Statistic.CUSTOM and not self.custom:
            raise SpecError("CUSTOM needs a registered statistic name")

    def to_dict(self) -> Dict:
        data = {
            "seed": self.seed,
            "trials": self.trials,
            "k": self.k,
            "statistic": Statistic(self.statistic).value,
        }
        if self.threshold is not None:
            data["threshold"] = Fraction(self.threshold)
        if self.h is not None:
            data["h"] = self.h
        if self.custom:
            data["custom"] = self.custom
        return data


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int
    min: float
    max: float
    raw_moments: Tuple[float, float, float, float]
    seed: int
    statistic: str
    histogram: Optional[Dict[int, int]] = field(default=None, repr=False)

    def within(self, exact: float, sigmas: float = 3.0, relative: float = 0.0) -> bool:
        """|mean - exact| <= max(sigmas·stderr, relative·|exact|)."""
        return abs(self.mean - float(exact)) <= max(sigmas * self.stderr, relative * abs(float(exact)))

    def to_dict(self) -> Dict:
        data = {
            "mean": self.mean,
            "stderr": self.stderr,
            "trials": self.trials,
            "min": self.min,
            "max": self.max,
            "raw_moments": list(self.raw_moments),
            "seed": self.seed,
            "statistic": self.statistic,
        }
        if self.histogram is not None:
            data["histogram"] = {str(k): v for k, v in self.histogram.items()}
        return data


# ----------------------------------------------------------------------
# Universes
# ----------------------------------------------------------------------

class Universe(ABC):
    """Read-only context shared by every trial."""

    name: str = "universe"
    size: int = 0
    action_domain_size: Optional[int] = None

    @abstractmethod
    def product_keys(self, left: np.ndarray, right: np.ndarray,
                     invert_left: bool = False, invert_right: bool = False) -> np.ndarray:
        """Integer keys identifying x·y for local indices (broadcast); equal keys ⟺ equal products."""

    def action_keys(self, delta_rows: np.ndarray, a_rows: np.ndarray) -> np.ndarray:
        raise SpecError(f"{self.name} carries no group action")


class FiniteUniverse(Universe):
    """A subset F of a finite group (all of G by default), optionally with an action on Φ."""

    def __init__(self, G: FiniteGroup, F: Optional[Subset] = None,
                 action: Optional[GroupAction] = None, Phi: Optional[Subset] = None):
        self.group = G
        self.F = Subset.full(G.order) if F is None else F
        if self.F.universe_size != G.order:
            raise SpecError("subset universe does not match the group order")
        self.members = self.F.as_array()
        self.size = len(self.members)
        self.name = G.spec if self.F.is_full() else f"{G.spec}[|F|={self.size}]"
        self.action = action
        if action is not None:
            self.Phi = Subset.full(action.domain_size) if Phi is None else Phi
            self.points = self.Phi.as_array()
            self.action_domain_size = len(self.points)

    def product_keys(self, left, right, invert_left=False, invert_right=False):
        x = self.members[left]
        y = self.members[right]
        if invert_left:
            x = self.group.inv[x]
        if invert_right:
            y = self.group.inv[y]
        return self.group.compose(x, y)

    def action_keys(self, delta_rows, a_rows):
        if self.action is None:
            return super().action_keys(delta_rows, a_rows)
        gammas = self.points[delta_rows]
        elements = self.members[a_rows]
        return self.action.act[gammas[:, :, None], elements[:, None, :]]


# ----------------------------------------------------------------------
# Statistics
# ----------------------------------------------------------------------

StatisticFn = Callable[[Universe, np.ndarray, SamplingConfig, Optional[np.ndarray]], np.ndarray]


def _pair_keys(universe: Universe, rows: np.ndarray, invert_left=False, invert_right=False) -> np.ndarray:
    keys = universe.product_keys(rows[:, :, None], rows[:, None, :], invert_left, invert_right)
    return keys.reshape(rows.shape[0], -1)


def _energy_aa(universe, rows, config, delta_rows=None):
    return batch_energy(_pair_keys(universe, rows))


def _energy_aainv(universe, rows, config, delta_rows=None):
    # histogram of x⁻¹a; same Σ r² as the ab⁻¹ histogram
    return batch_energy(_pair_keys(universe, rows, invert_left=True))


def _size_a2(universe, rows, config, delta_rows=None):
    return batch_image_size(_pair_keys(universe, rows))


def _size_aainv(universe, rows, config, delta_rows=None):
    return batch_image_size(_pair_keys(universe, rows, invert_right=True))


def _ratio_event(universe, rows, config, delta_rows=None):
    c = Fraction(config.threshold)
    squares = _size_a2(universe, rows, config)
    differences = _size_aainv(universe, rows, config)
    return (differences * c.denominator <= squares * c.numerator).astype(np.int64)


def _energy_action(universe, rows, config, delta_rows=None):
    keys = universe.action_keys(delta_rows, rows)
    return batch_energy(keys.reshape(rows.shape[0], -1))


_BUILTIN: Dict[Statistic, StatisticFn] = {
    Statistic.ENERGY_AA: _energy_aa,
    Statistic.ENERGY_AAINV: _energy_aainv,
    Statistic.SIZE_A2: _size_a2,
    Statistic.SIZE_AAINV: _size_aainv,
    Statistic.RATIO_EVENT: _ratio_event,
    Statistic.ENERGY_ACTION: _energy_action,
}
_CUSTOM: Dict[str, StatisticFn] = {}


def register_statistic(name: str):
    """Register a CUSTOM statistic under ``name`` (decorator)."""
    def decorator(fn: StatisticFn) -> StatisticFn:
        _CUSTOM[name] = fn
        return fn
    return decorator


def custom_statistics() -> List[str]:
    return sorted(_CUSTOM)


@register_statistic("SIZE_AINVA")
def _size_ainv_a(universe, rows, config, delta_rows=None):
    """|A⁻¹A|, which can differ from |AA⁻¹| in non-abelian groups."""
    return batch_image_size(_pair_keys(universe, rows, invert_left=True))


def resolve_statistic(config: SamplingConfig) -> StatisticFn:
    statistic = Statistic(config.statistic)
    if statistic == Statistic.CUSTOM:
        if config.custom not in _CUSTOM:
            raise SpecError(f"unknown custom statistic {config.custom!r}; registered: {custom_statistics()}")
        return _CUSTOM[config.custom]
    return _BUILTIN[statistic]


# ----------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------

def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """The RNG stream of one trial: PCG64 seeded by SeedSequence(seed, spawn_key=(trial,))."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(trial,))))


def floyd_sample(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Floyd's selection: for j = n-k..n-1 draw t uniform in [0, j] and insert
    t, or j when t is already taken. All k draws come from one
    ``rng.integers`` call. Returns the sorted indices.
    """
    if k < 0 or k > n:
        raise SpecError(f"cannot choose {k} of {n}")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    draws = rng.integers(0, np.arange(n - k + 1, n + 1, dtype=np.int64))
    chosen = set()
    for j, t in zip(range(n - k, n), draws.tolist()):
        chosen.add(j if t in chosen else t)
    return np.fromiter(sorted(chosen), dtype=np.int64, count=k)


def sample_k_subset(n: int, k: int, rng: np.random.Generator) -> Subset:
    """Uniform k-subset of {0..n-1}."""
    return Subset(n, tuple(floyd_sample(n, k, rng).tolist()))


def _draw_rows(universe: Universe, config: SamplingConfig, start: int, stop: int):
    rows = np.empty((stop - start, config.k), dtype=np.int64)
    deltas = None
    if Statistic(config.statistic) == Statistic.ENERGY_ACTION:
        deltas = np.empty((stop - start, config.h), dtype=np.int64)
    for offset, trial in enumerate(range(start, stop)):
        rng = trial_generator(config.seed, trial)
        rows[offset] = floyd_sample(universe.size, config.k, rng)
        if deltas is not None:
            deltas[offset] = floyd_sample(universe.action_domain_size, config.h, rng)
    return rows, deltas


def summarize(values: np.ndarray, config: SamplingConfig) -> McEstimate:
    values = np.asarray(values, dtype=np.float64)
    trials = len(values)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    moments = tuple(float(np.mean(values ** j)) for j in range(1, 5))

    histogram = None
    if np.all(values == np.round(values)):
        distinct, counts = np.unique(values, return_counts=True)
        if len(distinct) <= config.histogram_limit:
            histogram = {int(v): int(c) for v, c in zip(distinct.tolist(), counts.tolist())}

    statistic = Statistic(config.statistic).value
    if config.custom:
        statistic = f"{statistic}:{config.custom}"
    return McEstimate(
        mean=mean,
        stderr=stderr,
        trials=trials,
        min=float(values.min()),
        max=float(values.max()),
        raw_moments=moments,
        seed=config.seed,
        statistic=statistic,
        histogram=histogram,
    )


def mc_values(universe: Universe, config: SamplingConfig,
              evaluator: Optional[StatisticFn] = None) -> np.ndarray:
    """Per-trial statistic values, in trial order."""
    if config.k > universe.size:
        raise SpecError(f"k = {config.k} exceeds universe size {universe.size}")
    if config.k < 1:
        raise SpecError("k must be at least 1 for subset statistics")
    if Statistic(config.statistic) == Statistic.ENERGY_ACTION:
        if universe.action_domain_size is None or config.h > universe.action_domain_size:
            raise SpecError("ENERGY_ACTION needs an action whose domain holds h points")
    evaluate = evaluator or resolve_statistic(config)

    bounds = [(s, min(config.trials, s + config.chunk_size)) for s in range(0, config.trials, config.chunk_size)]

    def run_chunk(span: Tuple[int, int]) -> np.ndarray:
        rows, deltas = _draw_rows(universe, config, *span)
        return np.asarray(evaluate(universe, rows, config, deltas))

    with ThreadPoolExecutor(max_workers=max(1, config.threads)) as pool:
        parts = list(pool.map(run_chunk, bounds))
    return np.concatenate(parts)


def mc_expected(universe: Universe, config: SamplingConfig,
                evaluator: Optional[StatisticFn] = None) -> McEstimate:
    """Seeded Monte Carlo estimate; bit-identical for equal configs whatever the thread count."""
    logger.info(
        f"🚀 MC {Statistic(config.statistic).value} on {universe.name}: k={config.k}, "
        f"trials={config.trials}, seed={config.seed}, threads={config.threads}"
    )
    estimate = summarize(mc_values(universe, config, evaluator), config)
    logger.info(f"📊 mean={estimate.mean:.4f} ± {estimate.stderr:.4f} (min {estimate.min:g}, max {estimate.max:g})")
    return estimate


def brute_force_expected(universe: Universe, k: int, statistic: Statistic = Statistic.ENERGY_AA,
                         threshold: Optional[Fraction] = None, custom: Optional[str] = None,
                         cap: Optional[int] = None, evaluator: Optional[StatisticFn] = None) -> Fraction:
    """Exact average over all k-subsets, enumerated in lexicographic order."""
    statistic = Statistic(statistic)
    if statistic == Statistic.ENERGY_ACTION:
        raise SpecError("brute force covers statistics of A alone; use independent_action_expectation")
    n = universe.size
    if not 1 <= k <= n:
        raise SpecError(f"k = {k} outside 1..{n}")
    cap = get_settings().brute_cap if cap is None else cap
    total = math.comb(n, k)
    if total > cap:
        raise CapExceededError("brute-force subsets", total, cap)

    config = SamplingConfig(seed=0, trials=1, k=k, statistic=statistic, threshold=threshold, custom=custom)
    evaluate = evaluator or resolve_statistic(config)

    accumulated = Fraction(0)
    combos = itertools.combinations(range(n), k)
    while True:
        batch = list(itertools.islice(combos, BRUTE_FORCE_BATCH))
        if not batch:
            break
        values = np.asarray(evaluate(universe, np.array(batch, dtype=np.int64), config, None))
        if np.issubdtype(values.dtype, np.integer):
            accumulated += int(values.sum())
        else:
            accumulated += sum(Fraction(float(v)) for v in values)
    return accumulated / total
