"""
Cayley Balls of Infinite Groups
===============================
무한 유한생성군 모델, 단어 거리 공(ball), 밀도 프로파일, 공 위 에너지 실험

Features:
- FREE(r) 축약 단어, LATTICE(d) 정수 벡터, HEISENBERG 정수 삼중쌍, LAMPLIGHTER C2≀Z
- BFS 공 생성 (층 순서 → 정규형 사전식 순서), 크기 상한 검사
- 반경별 cp / sq / ι 밀도 (cp 는 모델별 구조적 카운터로 정확 계산, 상한 초과 시 샘플링)
- 공 위 균등 k-부분집합 에너지 몬테카를로 (정규형 해싱으로 일치 판정, 공 밖 곱도 허용)
- 유한 필트레이션 기대값 (Q-partition), Z 전용 선형 시간 카운터
"""

import logging
import math
from abc import ABC, abstractmethod
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.energy import EnergyReport, energy_report_from_points
from core.errors import CapExceededError, SpecError, check
from core.expectation import asymptotic_prediction, expectation_from_counts
from core.invariants import QPartitionCounts, Variant, class_sizes, q_partition_from_keys
from core.sampler import McEstimate, SamplingConfig, Statistic, Universe, mc_expected
from core.settings import get_settings

logger = logging.getLogger(__name__)

NormalForm = Hashable


class InfiniteGroupModel(ABC):
    """A finitely generated group with canonical normal forms."""

    name: str = "model"
    # (cp, sq, ι) limits along balls, when known
    limit_densities: Optional[Tuple[Fraction, Fraction, Fraction]] = None

    def __init__(self):
        self.generators: List[Tuple[str, NormalForm]] = self._generators()

    @abstractmethod
    def _generators(self) -> List[Tuple[str, NormalForm]]:
        """Symmetric generating set as (label, element) pairs."""

    @abstractmethod
    def identity(self) -> NormalForm:
        ...

    @abstractmethod
    def multiply(self, x: NormalForm, y: NormalForm) -> NormalForm:
        ...

    @abstractmethod
    def inverse(self, x: NormalForm) -> NormalForm:
        ...

    def multiply_generator(self, x: NormalForm, label: str) -> NormalForm:
        return self.multiply(x, dict(self.generators)[label])

    def evaluate_word(self, labels: Iterable[str]) -> NormalForm:
        lookup = dict(self.generators)
        result = self.identity()
        for label in labels:
            result = self.multiply(result, lookup[label])
        return result

    def is_involution(self, x: NormalForm) -> bool:
        return self.multiply(x, x) == self.identity()

    def commutes(self, x: NormalForm, y: NormalForm) -> bool:
        return self.multiply(x, y) == self.multiply(y, x)

    def sort_key(self, x: NormalForm):
        return x

    @abstractmethod
    def count_commuting_pairs(self, elements: Sequence[NormalForm]) -> int:
        """Ordered pairs (x, y) of ``elements`` with xy = yx."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class FreeGroup(InfiniteGroupModel):
    """Reduced words; letter i > 0 is the i-th generator and -i its inverse."""

    limit_densities = (Fraction(0), Fraction(0), Fraction(0))

    def __init__(self, rank: int = 2):
        if rank < 1:
            raise SpecError("free group rank must be positive")
        self.rank = rank
        self.name = f"free:{rank}"
        super().__init__()

    def _generators(self):
        gens = []
        for i in range(1, self.rank + 1):
            letter = "abcdefghijklmnopqrstuvwxyz"[i - 1] if self.rank <= 26 else f"x{i}"
            gens.append((letter, (i,)))
            gens.append((letter.upper() if self.rank <= 26 else f"{letter}^-1", (-i,)))
        return gens

    def identity(self):
        return ()

    def multiply(self, x, y):
        cancel = 0
        limit = min(len(x), len(y))
        while cancel < limit and x[-1 - cancel] == -y[cancel]:
            cancel += 1
        return x[:len(x) - cancel] + y[cancel:]

    def inverse(self, x):
        return tuple(-letter for letter in reversed(x))

    def root(self, x) -> tuple:
        """Canonical generator (up to inversion) of the maximal cyclic subgroup containing x ≠ 1."""
        peel = 0
        while 2 * peel + 1 < len(x) and x[peel] == -x[len(x) - 1 - peel]:
            peel += 1
        prefix = x[:peel]
        core = x[peel:len(x) - peel]
        length = len(core)
        for period in range(1, length + 1):
            if length % period == 0 and core == core[:period] * (length // period):
                core = core[:period]
                break
        r = prefix + core + self.inverse(prefix)
        return min(r, self.inverse(r))

    def count_commuting_pairs(self, elements):
        # nontrivial x, y commute iff they share a root
        total = len(elements)
        has_identity = () in set(elements)
        classes = Counter(self.root(x) for x in elements if x != ())
        pairs = sum(c * c for c in classes.values())
        if has_identity:
            pairs += 2 * total - 1
        return pairs


class Lattice(InfiniteGroupModel):
    """ℤ^d with the standard generators (``king`` adds the diagonal moves in d = 2)."""

    limit_densities = (Fraction(1), Fraction(0), Fraction(0))

    def __init__(self, dim: int = 1, king: bool = False):
        if dim < 1:
            raise SpecError("lattice dimension must be positive")
        if king and dim != 2:
            raise SpecError("the king generating set is defined for lattice:2 only")
        self.dim = dim
        self.king = king
        self.name = f"lattice:{dim}" + (":king" if king else "")
        super().__init__()

    def _generators(self):
        gens = []
        for i in range(self.dim):
            unit = tuple(1 if j == i else 0 for j in range(self.dim))
            gens.append((f"e{i + 1}", unit))
            gens.append((f"-e{i + 1}", tuple(-u for u in unit)))
        if self.king:
            for sx in (1, -1):
                for sy in (1, -1):
                    gens.append((f"({sx:+d},{sy:+d})", (sx, sy)))
        return gens

    def identity(self):
        return (0,) * self.dim

    def multiply(self, x, y):
        return tuple(a + b for a, b in zip(x, y))

    def inverse(self, x):
        return tuple(-a for a in x)

    def commutes(self, x, y):
        return True

    def count_commuting_pairs(self, elements):
        return len(elements) ** 2


class Heisenberg(InfiniteGroupModel):
    """Integer triples with (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')."""

    name = "heisenberg"
    limit_densities = (Fraction(0), Fraction(0), Fraction(0))

    def _generators(self):
        return [("x", (1, 0, 0)), ("X", (-1, 0, 0)), ("y", (0, 1, 0)), ("Y", (0, -1, 0))]

    def identity(self):
        return (0, 0, 0)

    def multiply(self, x, y):
        return (x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1])

    def inverse(self, x):
        return (-x[0], -x[1], x[0] * x[1] - x[2])

    def commutes(self, x, y):
        return x[0] * y[1] == y[0] * x[1]

    @staticmethod
    def _direction(a: int, b: int) -> Tuple[int, int]:
        g = math.gcd(a, b)
        a, b = a // g, b // g
        if a < 0 or (a == 0 and b < 0):
            a, b = -a, -b
        return a, b

    def count_commuting_pairs(self, elements):
        # (a,b,c) and (a',b',c') commute iff ab' = a'b
        total = len(elements)
        central = 0
        directions = Counter()
        for a, b, _ in elements:
            if a == 0 and b == 0:
                central += 1
            else:
                directions[self._direction(a, b)] += 1
        return central * total + sum(n * (central + n) for n in directions.values())


class Lamplighter(InfiniteGroupModel):
    """C2≀ℤ as (sorted lit positions, cursor); (f,m)(g,n) = (f △ (g+m), m+n)."""

    name = "lamplighter"

    def _generators(self):
        return [("t", ((), 1)), ("T", ((), -1)), ("a", ((0,), 0))]

    def identity(self):
        return ((), 0)

    @staticmethod
    def _shift(lamps: Iterable[int], offset: int) -> frozenset:
        return frozenset(p + offset for p in lamps)

    def multiply(self, x, y):
        lamps = frozenset(x[0]) ^ self._shift(y[0], x[1])
        return (tuple(sorted(lamps)), x[1] + y[1])

    def inverse(self, x):
        return (tuple(sorted(self._shift(x[0], -x[1]))), -x[1])

    def is_involution(self, x):
        return x[1] == 0

    def count_commuting_pairs(self, elements):
        # (f,m),(g,n) commute iff f △ (f+n) = g △ (g+m)
        by_cursor: Dict[int, List[frozenset]] = defaultdict(list)
        for lamps, cursor in elements:
            by_cursor[cursor].append(frozenset(lamps))
        cursors = sorted(by_cursor)
        pairs = 0
        for m in cursors:
            for n in cursors:
                left = Counter(f ^ self._shift(f, n) for f in by_cursor[m])
                right = Counter(g ^ self._shift(g, m) for g in by_cursor[n])
                pairs += sum(count * right[key] for key, count in left.items())
        return pairs


def parse_model_spec(text: str) -> InfiniteGroupModel:
    """``free:2``, ``lattice:2``, ``lattice:2:king``, ``heisenberg``, ``lamplighter``."""
    parts = [p.strip().lower() for p in text.strip().split(":")]
    family = parts[0]
    try:
        if family == "free":
            return FreeGroup(int(parts[1]) if len(parts) > 1 else 2)
        if family == "lattice":
            dim = int(parts[1]) if len(parts) > 1 else 1
            return Lattice(dim, king=len(parts) > 2 and parts[2] == "king")
        if family == "heisenberg":
            return Heisenberg()
        if family == "lamplighter":
            return Lamplighter()
    except ValueError:
        raise SpecError(f"malformed model spec {text!r}")
    raise SpecError(f"unknown model {text!r}")


# ----------------------------------------------------------------------
# Balls
# ----------------------------------------------------------------------

class Ball(Sequence):
    """Ball B_S(n) in BFS layer order, each layer sorted by normal form."""

    def __init__(self, model: InfiniteGroupModel, radius: int, elements: List[NormalForm], layer_sizes: List[int]):
        self.model = model
        self.radius = radius
        self.elements = elements
        self.layer_sizes = layer_sizes
        self.index = {x: i for i, x in enumerate(elements)}

    def __getitem__(self, i):
        return self.elements[i]

    def __len__(self) -> int:
        return len(self.elements)

    def prefix_size(self, radius: int) -> int:
        return sum(self.layer_sizes[:radius + 1])

    def word_length(self, i: int) -> int:
        bound = 0
        for r, size in enumerate(self.layer_sizes):
            bound += size
            if i < bound:
                return r
        raise IndexError(i)

    def is_symmetric(self) -> bool:
        return all(self.model.inverse(x) in self.index for x in self.elements)


def ball(model: InfiniteGroupModel, n: int, cap: Optional[int] = None) -> Ball:
    """Exact BFS ball of radius n."""
    if n < 0:
        raise SpecError("radius must be non-negative")
    cap = get_settings().ball_cap if cap is None else cap
    identity = model.identity()
    seen = {identity}
    elements = [identity]
    layers = [1]
    frontier = [identity]
    for _ in range(n):
        fresh = set()
        for x in frontier:
            for _, s in model.generators:
                y = model.multiply(x, s)
                if y not in seen:
                    seen.add(y)
                    fresh.add(y)
        if len(seen) > cap:
            raise CapExceededError(f"ball of {model.name}", len(seen), cap)
        frontier = sorted(fresh, key=model.sort_key)
        elements.extend(frontier)
        layers.append(len(frontier))
    logger.debug(f"Ball {model.name} radius {n}: {len(elements)} elements")
    return Ball(model, n, elements, layers)


def free_ball_size(rank: int, n: int) -> int:
    if rank == 1:
        return 2 * n + 1
    return 1 + 2 * rank * ((2 * rank - 1) ** n - 1) // (2 * rank - 2)


def lattice_ball_size(dim: int, n: int) -> int:
    return sum(2 ** i * math.comb(dim, i) * math.comb(n, i) for i in range(dim + 1))


# ----------------------------------------------------------------------
# Ball universes for the sampler
# ----------------------------------------------------------------------

class ModelBallUniverse(Universe):
    """Products computed in the model; keys are normal forms interned per call."""

    def __init__(self, b: Ball):
        self.ball = b
        self.model = b.model
        self.size = len(b)
        self.name = f"{b.model.name}[r={b.radius}]"
        self.elements = list(b.elements)
        self.inverses = [self.model.inverse(x) for x in self.elements]

    def product_keys(self, left, right, invert_left=False, invert_right=False):
        left_b, right_b = np.broadcast_arrays(np.asarray(left), np.asarray(right))
        xs = self.inverses if invert_left else self.elements
        ys = self.inverses if invert_right else self.elements
        multiply = self.model.multiply
        interned: Dict[NormalForm, int] = {}
        keys = [
            interned.setdefault(multiply(xs[i], ys[j]), len(interned))
            for i, j in zip(left_b.ravel().tolist(), right_b.ravel().tolist())
        ]
        return np.array(keys, dtype=np.int64).reshape(left_b.shape)


class LatticeBallUniverse(Universe):
    """Vectorized ℤ^d arithmetic on ball coordinates."""

    def __init__(self, b: Ball):
        self.ball = b
        self.size = len(b)
        self.name = f"{b.model.name}[r={b.radius}]"
        self.coords = np.array(b.elements, dtype=np.int64).reshape(len(b), -1)
        self.offset = 2 * max(1, b.radius) + 1
        self.base = 2 * self.offset + 1
        self.weights = self.base ** np.arange(self.coords.shape[1], dtype=np.int64)

    def product_keys(self, left, right, invert_left=False, invert_right=False):
        x = self.coords[np.asarray(left)]
        y = self.coords[np.asarray(right)]
        total = (-x if invert_left else x) + (-y if invert_right else y)
        return (total + self.offset) @ self.weights


def ball_universe(b: Ball) -> Universe:
    if isinstance(b.model, Lattice):
        return LatticeBallUniverse(b)
    return ModelBallUniverse(b)


# ----------------------------------------------------------------------
# Density profiles
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DensityRow:
    radius: int
    ball_size: int
    cp: float
    cp_exactness: str
    cp_stderr: float
    sq: Fraction
    iota: Fraction
    growth_ratio: Optional[float]
    growth_degree: Optional[float]
    cp_exact: Optional[Fraction] = None


@dataclass
class DensityProfile:
    model: str
    rows: List[DensityRow] = field(default_factory=list)

    def to_records(self) -> List[Dict]:
        return [
            {
                "n": row.radius,
                "ball": row.ball_size,
                "cp": row.cp_exact if row.cp_exact is not None else row.cp,
                "cp_exactness": row.cp_exactness,
                "cp_stderr": row.cp_stderr,
                "sq": row.sq,
                "iota": row.iota,
                "growth_ratio": row.growth_ratio,
                "growth_degree": row.growth_degree,
            }
            for row in self.rows
        ]

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "n": row.radius,
                "ball": row.ball_size,
                "cp": row.cp,
                "cp_exactness": row.cp_exactness,
                "cp_stderr": row.cp_stderr,
                "sq": float(row.sq),
                "sq_exact": str(row.sq),
                "iota": float(row.iota),
                "iota_exact": str(row.iota),
                "growth_ratio": row.growth_ratio,
                "growth_degree": row.growth_degree,
            }
            for row in self.rows
        ])

    def check(self) -> None:
        sizes = [row.ball_size for row in self.rows]
        check(all(a < b for a, b in zip(sizes, sizes[1:])), f"{self.model}: ball sizes not strictly increasing")
        for row in self.rows:
            check(0 <= row.cp <= 1 and 0 <= row.sq <= 1 and 0 <= row.iota <= 1,
                  f"{self.model}: density outside [0, 1] at n={row.radius}")
            check((row.iota * row.ball_size).denominator == 1, "iota_n·|B_n| is not an integer")


def density_profile(model: InfiniteGroupModel, n_max: int, exact_pair_cap: Optional[int] = None,
                    pair_samples: Optional[int] = None, seed: int = 0, cap: Optional[int] = None) -> DensityProfile:
    """
    Per-radius |B_n|, cp_n, sq_n and ι_n.

    ι_n and sq_n are exact (linear scans); cp_n is exact up to
    ``exact_pair_cap`` elements and estimated from uniform pairs beyond.
    """
    settings = get_settings()
    exact_pair_cap = settings.pair_cap if exact_pair_cap is None else exact_pair_cap
    pair_samples = settings.pair_samples if pair_samples is None else pair_samples
    b = ball(model, n_max, cap=cap)
    identity = model.identity()

    profile = DensityProfile(model=model.name)
    square_counts: Counter = Counter()
    square_pairs = 0
    involutions = 0
    filled = 0
    previous = None
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    for radius in range(n_max + 1):
        size = b.prefix_size(radius)
        for x in b.elements[filled:size]:
            s = model.multiply(x, x)
            square_pairs += 2 * square_counts[s] + 1
            square_counts[s] += 1
            if s == identity:
                involutions += 1
        filled = size
        prefix = b.elements[:size]

        if size <= exact_pair_cap:
            cp_exact = Fraction(model.count_commuting_pairs(prefix), size * size)
            cp, exactness, cp_stderr = float(cp_exact), "exact", 0.0
        else:
            cp_exact = None
            picks = rng.integers(0, size, size=(pair_samples, 2))
            hits = sum(1 for i, j in picks.tolist() if model.commutes(prefix[i], prefix[j]))
            cp = hits / pair_samples
            cp_stderr = math.sqrt(max(cp * (1 - cp), 0.0) / pair_samples)
            exactness = "sampled"

        profile.rows.append(DensityRow(
            radius=radius,
            ball_size=size,
            cp=cp,
            cp_exactness=exactness,
            cp_stderr=cp_stderr,
            sq=Fraction(square_pairs, size * size),
            iota=Fraction(involutions, size),
            growth_ratio=None if previous is None else size / previous,
            growth_degree=math.log(size) / math.log(radius) if radius >= 2 else None,
            cp_exact=cp_exact,
        ))
        previous = size

    profile.check()
    logger.info(f"📊 Density profile {model.name}: n_max={n_max}, |B|={len(b)}")
    return profile


# ----------------------------------------------------------------------
# Energies on balls
# ----------------------------------------------------------------------

def model_energy(model: InfiniteGroupModel, A: Sequence[NormalForm], D: Sequence[NormalForm]) -> EnergyReport:
    """E(A, Δ) for finite sets of normal forms under the right regular action."""
    interned: Dict[NormalForm, int] = {}
    points = np.array(
        [[interned.setdefault(model.multiply(g, a), len(interned)) for a in A] for g in D],
        dtype=np.int64,
    ).reshape(len(D), len(A))
    return energy_report_from_points(points, len(A), len(D), semiregular=True)


def _statistic_for(variant: Variant) -> Statistic:
    variant = Variant(variant)
    if variant == Variant.AA:
        return Statistic.ENERGY_AA
    if variant == Variant.AAINV:
        return Statistic.ENERGY_AAINV
    raise SpecError("ball energies support the AA and AAINV variants")


def ball_energy_mc(model: InfiniteGroupModel, n: int, k: int, variant: Variant,
                   config: SamplingConfig, cap: Optional[int] = None) -> McEstimate:
    """MC estimate of E[E(A,A)] or E[E(A,A⁻¹)] for uniform k-subsets of B_n."""
    b = ball(model, n, cap=cap)
    if k > len(b):
        raise SpecError(f"k = {k} exceeds |B_{n}| = {len(b)}")
    config = replace(config, k=k, statistic=_statistic_for(variant))
    return mc_expected(ball_universe(b), config)


def _integer_interval_counts(radius: int, variant: Variant) -> QPartitionCounts:
    """Q-partition of B = [-r, r] ⊂ ℤ in closed form (abelian, torsion-free)."""
    variant = Variant(variant)
    r = radius
    m = 2 * r + 1
    values = np.arange(-r, r + 1, dtype=np.int64)

    # T = #{(a, c) ∈ B² : |2c - a| <= r}
    lo = np.maximum(-r, 2 * values - r)
    hi = np.minimum(r, 2 * values + r)
    T = int(np.clip(hi - lo + 1, 0, None).sum())
    # S = Σ over ordered pairs a != b of |a + b|
    sums = np.arange(-2 * r, 2 * r + 1, dtype=np.int64)
    S = int((np.abs(sums) * (m - np.abs(sums))).sum() - np.abs(2 * values).sum())

    ordered = m * (m - 1)
    distinct = m * (m - 1) * (m - 2)
    middle = T - m
    if variant == Variant.AA:
        counts = {
            "Q1_1": 0, "Q1_2": middle, "Q1_3": distinct - middle,
            "Q2": ordered, "Q3_1": ordered, "Q3_2": 0,
            "Q4_1": 0, "Q4_2": ordered, "Q5": m,
        }
        escaped = {name: 0 for name in counts}
        escaped["Q1_3"] = S
        escaped["Q4_2"] = ordered - middle
    else:
        counts = {
            "Q1_1": middle, "Q1_2": distinct - middle,
            "Q2": ordered, "Q3_1": 0, "Q3_2": ordered,
            "Q4": ordered, "Q5": m,
        }
        escaped = {name: 0 for name in counts}
        escaped["Q1_2"] = S
        escaped["Q3_2"] = ordered - middle
    result = QPartitionCounts(variant=variant, counts=counts, universe_size=m, escaped=escaped)
    result.check()
    return result


def ball_q_partition(model: InfiniteGroupModel, n: int, variant: Variant,
                     cap: Optional[int] = None, threads: int = 1) -> QPartitionCounts:
    """Q-partition of B_n with escapes (fourth element outside the ball)."""
    variant = Variant(variant)
    class_sizes(variant)
    if isinstance(model, Lattice) and model.dim == 1 and not model.king:
        return _integer_interval_counts(n, variant)
    cap = get_settings().enum_cap if cap is None else cap
    b = ball(model, n)
    m = len(b)
    if m ** 3 > cap:
        raise CapExceededError("ball Q-partition triples", m ** 3, cap)
    universe = ModelBallUniverse(b)
    idx = np.arange(m)
    keys = universe.product_keys(idx[:, None], idx[None, :], invert_right=variant == Variant.AAINV)
    return q_partition_from_keys(keys, variant, closed=(n == 0), threads=threads)


def finite_filtration_expectation(model: InfiniteGroupModel, n: int, k: int, variant: Variant,
                                  cap: Optional[int] = None) -> Fraction:
    """Exact E over uniform k-subsets of B_n, counting only quadruples inside B_n."""
    return expectation_from_counts(ball_q_partition(model, n, variant, cap=cap), k)


def filtration_convergence(model: InfiniteGroupModel, radii: Sequence[int], k: int,
                           variant: Variant) -> Dict:
    """Deviation of the filtration expectation from the asymptotic value, with C = max n·|dev|."""
    if model.limit_densities is None:
        raise SpecError(f"no limiting densities known for {model.name}")
    cp, sq, iota = model.limit_densities
    target = asymptotic_prediction(variant, k, cp=cp, sq=sq, iota=iota)
    rows = []
    for radius in radii:
        value = finite_filtration_expectation(model, radius, k, variant)
        deviation = value - target
        rows.append({"radius": radius, "value": value, "deviation": deviation,
                     "scaled": abs(deviation) * radius})
    fitted = max((row["scaled"] for row in rows), default=Fraction(0))
    logger.info(f"📊 {model.name} filtration k={k} {Variant(variant).value}: target {target}, fitted C = {float(fitted):.4f}")
    return {"model": model.name, "k": k, "variant": Variant(variant).value,
            "prediction": target, "rows": rows, "fitted_constant": fitted}
