"""
Finite Group Core
=================
유한군 생성 및 연산 (곱셈표, 역원표, 군 작용)

Features:
- cyclic / elementary abelian 2 / dihedral / symmetric / GL2(q) / direct product / permutation closure
- 작은 군은 곱셈표를 미리 생성, 큰 군은 벡터화된 family arithmetic 으로 곱셈
- 생성 시 군 공리 자동 검증 (Latin square, 항등원, 역원, 결합법칙)
- GroupAction (정규 작용, 치환군의 자연 작용)
- Subset (정렬된 원소 인덱스 집합)
"""

import itertools
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import CapExceededError, InvariantViolation, SpecError, check
from core.settings import get_settings

logger = logging.getLogger(__name__)

ORDER_CAP = 1 << 20
CLOSURE_CAP = 1_000_000
FULL_ASSOCIATIVITY_ORDER = 64
SAMPLED_TRIPLES = 100_000
GL2_PRIMES = (2, 3, 5, 7)

Compose = Callable[[np.ndarray, np.ndarray], np.ndarray]
IndexLike = Union[int, np.ndarray]


class FiniteGroup:
    """
    Finite group on the element indices 0..order-1.

    Multiplication goes through a materialized table when the order is at most
    ``table_cap``; otherwise through the family's vectorized ``compose``.
    Instances are immutable after construction.
    """

    def __init__(
        self,
        order: int,
        identity: int,
        inv: np.ndarray,
        compose: Compose,
        family_tag: str,
        spec: str,
        labeler: Callable[[int], str],
        is_abelian: bool,
        table_cap: Optional[int] = None,
        perms: Optional[np.ndarray] = None,
    ):
        if order < 1:
            raise SpecError("group order must be positive")
        if order > ORDER_CAP:
            raise CapExceededError("group order", order, ORDER_CAP)

        self.order = int(order)
        self.identity = int(identity)
        self.inv = np.asarray(inv, dtype=np.int64)
        self.inv.setflags(write=False)
        self.family_tag = family_tag
        self.spec = spec
        self.is_abelian = bool(is_abelian)
        self.perms = perms
        self.table_cap = get_settings().table_cap if table_cap is None else table_cap
        self._compose = compose
        self._labeler = labeler
        self._labels: Optional[List[str]] = None
        self._label_index: Optional[Dict[str, int]] = None
        self._table: Optional[np.ndarray] = None

        if self.order <= self.table_cap:
            self._table = self._build_table()

    def __repr__(self) -> str:
        return f"FiniteGroup({self.spec!r}, order={self.order})"

    # ------------------------------------------------------------------
    # Multiplication
    # ------------------------------------------------------------------

    def _build_table(self) -> np.ndarray:
        n = self.order
        table = np.empty((n, n), dtype=np.int32)
        columns = np.arange(n, dtype=np.int64)
        chunk = max(1, 1_000_000 // n)
        for start in range(0, n, chunk):
            rows = np.arange(start, min(n, start + chunk), dtype=np.int64)
            g, h = np.broadcast_arrays(rows[:, None], columns[None, :])
            table[start:start + len(rows)] = self._compose(g, h)
        table.setflags(write=False)
        return table

    @property
    def has_table(self) -> bool:
        return self._table is not None

    @property
    def mul(self) -> np.ndarray:
        """order×order multiplication table (only below the table cap)."""
        if self._table is None:
            raise CapExceededError(
                "multiplication table", self.order, self.table_cap,
                "this group multiplies through family arithmetic"
            )
        return self._table

    def compose(self, g: IndexLike, h: IndexLike) -> np.ndarray:
        """Vectorized g·h over broadcast index arrays (no range checks)."""
        g_arr = np.asarray(g, dtype=np.int64)
        h_arr = np.asarray(h, dtype=np.int64)
        if self._table is not None:
            return self._table[g_arr, h_arr].astype(np.int64, copy=False)
        g_b, h_b = np.broadcast_arrays(g_arr, h_arr)
        return np.asarray(self._compose(g_b, h_b), dtype=np.int64)

    def inverse(self, g: IndexLike) -> np.ndarray:
        return self.inv[np.asarray(g, dtype=np.int64)]

    def elements(self) -> np.ndarray:
        return np.arange(self.order, dtype=np.int64)

    # ------------------------------------------------------------------
    # Labels
    # ------------------------------------------------------------------

    def label(self, g: int) -> str:
        return self._labeler(int(g))

    @property
    def labels(self) -> List[str]:
        if self._labels is None:
            self._labels = [self._labeler(g) for g in range(self.order)]
        return self._labels

    def find(self, label: str) -> int:
        """Index of the element with the given label."""
        if self._label_index is None:
            self._label_index = {name: idx for idx, name in enumerate(self.labels)}
        key = label.strip()
        if key not in self._label_index:
            raise SpecError(f"no element labelled {label!r} in {self.spec}")
        return self._label_index[key]


def multiply(G: FiniteGroup, g: IndexLike, h: IndexLike) -> IndexLike:
    """Checked product g·h; scalars in, scalar out."""
    g_arr = np.asarray(g, dtype=np.int64)
    h_arr = np.asarray(h, dtype=np.int64)
    for arr in (g_arr, h_arr):
        if arr.size and (arr.min() < 0 or arr.max() >= G.order):
            raise SpecError(f"element index out of range for group of order {G.order}")
    result = G.compose(g_arr, h_arr)
    if result.ndim == 0:
        return int(result)
    return result


# ----------------------------------------------------------------------
# Group axiom checks
# ----------------------------------------------------------------------

def check_group_axioms(G: FiniteGroup, seed: int = 0) -> None:
    """
    Verify Latin square, identity, inverse and associativity.

    Associativity is checked over all triples up to order 64 and over
    100000 random triples beyond. Raises InvariantViolation.
    """
    n = G.order
    everything = G.elements()
    rng = np.random.default_rng(seed)

    check(np.array_equal(G.compose(G.identity, everything), everything), f"{G.spec}: left identity fails")
    check(np.array_equal(G.compose(everything, G.identity), everything), f"{G.spec}: right identity fails")
    check(bool(np.all(G.compose(everything, G.inv) == G.identity)), f"{G.spec}: inverse table fails")

    if G.has_table and n <= 512:
        ordered = np.arange(n)
        check(bool(np.all(np.sort(G.mul, axis=1) == ordered)), f"{G.spec}: rows are not permutations")
        check(bool(np.all(np.sort(G.mul, axis=0) == ordered[:, None])), f"{G.spec}: columns are not permutations")
    else:
        for g in rng.integers(0, n, size=min(n, 16)):
            check(len(np.unique(G.compose(g, everything))) == n, f"{G.spec}: row {g} is not a permutation")
            check(len(np.unique(G.compose(everything, g))) == n, f"{G.spec}: column {g} is not a permutation")

    if n <= FULL_ASSOCIATIVITY_ORDER:
        a = everything[:, None, None]
        b = everything[None, :, None]
        c = everything[None, None, :]
    else:
        a, b, c = rng.integers(0, n, size=(3, SAMPLED_TRIPLES))
    left = G.compose(G.compose(a, b), c)
    right = G.compose(a, G.compose(b, c))
    check(bool(np.all(left == right)), f"{G.spec}: associativity fails")


# ----------------------------------------------------------------------
# Families
# ----------------------------------------------------------------------

def cyclic(n: int, table_cap: Optional[int] = None) -> FiniteGroup:
    if n < 1:
        raise SpecError("cyclic group needs n >= 1")
    if n > ORDER_CAP:
        raise CapExceededError("group order", n, ORDER_CAP)
    idx = np.arange(n, dtype=np.int64)
    return FiniteGroup(
        order=n,
        identity=0,
        inv=(-idx) % n,
        compose=lambda g, h: (g + h) % n,
        family_tag="cyclic",
        spec=f"cyclic:{n}",
        labeler=str,
        is_abelian=True,
        table_cap=table_cap,
    )


def elementary_abelian_2(m: int, table_cap: Optional[int] = None) -> FiniteGroup:
    if m < 1 or (1 << m) > ORDER_CAP:
        raise SpecError("elementary abelian 2-group needs 1 <= m <= 20")
    n = 1 << m

    def labeler(g: int) -> str:
        return "(" + ",".join(str((g >> bit) & 1) for bit in range(m)) + ")"

    return FiniteGroup(
        order=n,
        identity=0,
        inv=np.arange(n, dtype=np.int64),
        compose=np.bitwise_xor,
        family_tag="elementary-abelian-2",
        spec=f"ea2:{m}",
        labeler=labeler,
        is_abelian=True,
        table_cap=table_cap,
    )


def dihedral(n: int, table_cap: Optional[int] = None) -> FiniteGroup:
    """Symmetries of the regular n-gon, order 2n; index i + n*j stands for r^i s^j."""
    if n < 2:
        raise SpecError("dihedral group needs n >= 2")

    def compose(g: np.ndarray, h: np.ndarray) -> np.ndarray:
        i1, j1 = g % n, g // n
        i2, j2 = h % n, h // n
        i = (i1 + np.where(j1 == 1, -i2, i2)) % n
        return i + n * ((j1 + j2) % 2)

    idx = np.arange(2 * n, dtype=np.int64)
    rot, ref = idx % n, idx // n
    inv = np.where(ref == 1, idx, (-rot) % n)

    def labeler(g: int) -> str:
        i, j = g % n, g // n
        return f"r^{i}" + (" s" if j else "")

    return FiniteGroup(
        order=2 * n,
        identity=0,
        inv=inv,
        compose=compose,
        family_tag="dihedral",
        spec=f"dihedral:{n}",
        labeler=labeler,
        is_abelian=n <= 2,
        table_cap=table_cap,
    )


def cycle_notation(images: Sequence[int]) -> str:
    """Cycle notation with 1-based points, e.g. '(1 2)(3 4)'; identity is '()'."""
    seen = set()
    cycles = []
    for start in range(len(images)):
        if start in seen or images[start] == start:
            continue
        cycle = [start]
        seen.add(start)
        nxt = images[start]
        while nxt != start:
            cycle.append(nxt)
            seen.add(nxt)
            nxt = images[nxt]
        cycles.append("(" + " ".join(str(p + 1) for p in cycle) + ")")
    return "".join(cycles) or "()"


def parse_cycles(text: str, degree: int) -> Tuple[int, ...]:
    """Parse 1-based cycle notation into an image tuple."""
    images = list(range(degree))
    for body in re.findall(r"\(([^()]*)\)", text):
        points = [int(p) - 1 for p in body.replace(",", " ").split()]
        if any(p < 0 or p >= degree for p in points) or len(set(points)) != len(points):
            raise SpecError(f"bad cycle ({body}) for degree {degree}")
        for a, b in zip(points, points[1:] + points[:1]):
            images[a] = b
    return tuple(images)


class _PermutationFamily:
    """Index arithmetic for a list of permutations of {0..degree-1}."""

    def __init__(self, perms: np.ndarray):
        self.perms = np.asarray(perms, dtype=np.int64)
        self.degree = self.perms.shape[1]
        self.weights = self.degree ** np.arange(self.degree, dtype=np.int64)
        codes = self.perms @ self.weights
        self.order_of_codes = np.argsort(codes, kind="stable")
        self.sorted_codes = codes[self.order_of_codes]

    def lookup(self, perms: np.ndarray) -> np.ndarray:
        codes = perms @ self.weights
        pos = np.searchsorted(self.sorted_codes, codes)
        pos = np.minimum(pos, len(self.sorted_codes) - 1)
        if not np.all(self.sorted_codes[pos] == codes):
            raise InvariantViolation("permutation product left the group")
        return self.order_of_codes[pos]

    def compose(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        # (g·h)(x) = h(g(x)): apply g first
        composed = np.take_along_axis(self.perms[h], self.perms[g], axis=-1)
        return self.lookup(composed)

    def inverses(self) -> np.ndarray:
        inverse_perms = np.argsort(self.perms, axis=1)
        return self.lookup(inverse_perms)


def _permutation_group(perms: np.ndarray, family_tag: str, spec: str, is_abelian: bool,
                       table_cap: Optional[int]) -> FiniteGroup:
    family = _PermutationFamily(perms)
    identity = int(family.lookup(np.arange(family.degree, dtype=np.int64)[None, :])[0])
    stored = family.perms
    stored.setflags(write=False)
    return FiniteGroup(
        order=len(stored),
        identity=identity,
        inv=family.inverses(),
        compose=family.compose,
        family_tag=family_tag,
        spec=spec,
        labeler=lambda g: cycle_notation(stored[g].tolist()),
        is_abelian=is_abelian,
        table_cap=table_cap,
        perms=stored,
    )


def symmetric(n: int, table_cap: Optional[int] = None) -> FiniteGroup:
    """Sym(n) with elements in lexicographic order of their image tuples (identity first)."""
    if n < 1 or n > 8:
        raise SpecError("symmetric group needs 1 <= n <= 8")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    return _permutation_group(perms, "symmetric", f"sym:{n}", n <= 2, table_cap)


def perm_closure(generators: Sequence[Sequence[int]], degree: int,
                 table_cap: Optional[int] = None, spec: Optional[str] = None) -> FiniteGroup:
    """
    Group generated by permutations (image tuples), by breadth-first closure.

    Element order is BFS discovery order with the identity first.
    """
    if degree < 1 or degree > 15:
        raise SpecError("permutation degree must be between 1 and 15")
    gens = [tuple(int(x) for x in g) for g in generators]
    for g in gens:
        if sorted(g) != list(range(degree)):
            raise SpecError(f"{g} is not a permutation of degree {degree}")

    identity = tuple(range(degree))
    found = {identity: 0}
    ordered = [identity]
    queue = deque([identity])
    while queue:
        x = queue.popleft()
        for s in gens:
            y = tuple(s[x[p]] for p in range(degree))
            if y not in found:
                if len(ordered) >= CLOSURE_CAP:
                    raise CapExceededError("permutation closure", len(ordered) + 1, CLOSURE_CAP)
                found[y] = len(ordered)
                ordered.append(y)
                queue.append(y)

    abelian = all(
        tuple(b[a[p]] for p in range(degree)) == tuple(a[b[p]] for p in range(degree))
        for a, b in itertools.combinations(gens, 2)
    )
    name = spec or "perm:{}:{}".format(degree, ";".join(cycle_notation(g) for g in gens))
    return _permutation_group(np.array(ordered, dtype=np.int64), "perm-closure", name, abelian, table_cap)


def gl2(q: int, table_cap: Optional[int] = None) -> FiniteGroup:
    """GL2(q) for prime q; elements are invertible matrices in row-major lexicographic order."""
    if q not in GL2_PRIMES:
        raise SpecError(f"gl2 supports q in {GL2_PRIMES}, got {q}")
    mats = np.array(
        [m for m in itertools.product(range(q), repeat=4) if (m[0] * m[3] - m[1] * m[2]) % q],
        dtype=np.int64,
    )
    expected = (q * q - 1) * (q * q - q)
    check(len(mats) == expected, f"gl2({q}) has {len(mats)} elements, expected {expected}")

    weights = np.array([q ** 3, q ** 2, q, 1], dtype=np.int64)
    code_to_index = np.full(q ** 4, -1, dtype=np.int64)
    code_to_index[mats @ weights] = np.arange(len(mats))

    def compose(g: np.ndarray, h: np.ndarray) -> np.ndarray:
        a, b, c, d = np.moveaxis(mats[g], -1, 0)
        e, f, u, v = np.moveaxis(mats[h], -1, 0)
        code = (((a * e + b * u) % q) * weights[0] + ((a * f + b * v) % q) * weights[1]
                + ((c * e + d * u) % q) * weights[2] + (c * f + d * v) % q)
        return code_to_index[code]

    det = (mats[:, 0] * mats[:, 3] - mats[:, 1] * mats[:, 2]) % q
    det_inv = np.array([pow(int(x), q - 2, q) for x in det], dtype=np.int64)
    adj = np.stack([mats[:, 3], -mats[:, 1], -mats[:, 2], mats[:, 0]], axis=1)
    inv_mats = (adj * det_inv[:, None]) % q
    identity = int(code_to_index[np.array([1, 0, 0, 1]) @ weights])

    def labeler(g: int) -> str:
        a, b, c, d = mats[g].tolist()
        return f"[[{a},{b}],[{c},{d}]]"

    return FiniteGroup(
        order=len(mats),
        identity=identity,
        inv=code_to_index[inv_mats @ weights],
        compose=compose,
        family_tag="gl2",
        spec=f"gl2:{q}",
        labeler=labeler,
        is_abelian=False,
        table_cap=table_cap,
    )


def direct_product(A: FiniteGroup, B: FiniteGroup, table_cap: Optional[int] = None) -> FiniteGroup:
    """A × B with index i*|B| + j for (a_i, b_j)."""
    order = A.order * B.order
    if order > ORDER_CAP:
        raise CapExceededError("group order", order, ORDER_CAP)
    nb = B.order

    def compose(g: np.ndarray, h: np.ndarray) -> np.ndarray:
        return A.compose(g // nb, h // nb) * nb + B.compose(g % nb, h % nb)

    idx = np.arange(order, dtype=np.int64)
    return FiniteGroup(
        order=order,
        identity=A.identity * nb + B.identity,
        inv=A.inv[idx // nb] * nb + B.inv[idx % nb],
        compose=compose,
        family_tag="product",
        spec=f"prod({A.spec},{B.spec})",
        labeler=lambda g: f"({A.label(g // nb)}, {B.label(g % nb)})",
        is_abelian=A.is_abelian and B.is_abelian,
        table_cap=table_cap,
    )


# ----------------------------------------------------------------------
# Spec mini-language
# ----------------------------------------------------------------------

def _split_top_level(text: str) -> List[str]:
    parts, depth, start = [], 0, 0
    for pos, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:pos])
            start = pos + 1
    parts.append(text[start:])
    return [p.strip() for p in parts]


def _parse_int(value: str, spec: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise SpecError(f"malformed group spec {spec!r}")


def _construct(spec: str, table_cap: Optional[int]) -> FiniteGroup:
    text = spec.strip()
    if text.startswith("prod(") and text.endswith(")"):
        parts = _split_top_level(text[5:-1])
        if len(parts) != 2:
            raise SpecError(f"prod needs exactly two factors: {spec!r}")
        return direct_product(_construct(parts[0], table_cap), _construct(parts[1], table_cap), table_cap)

    family, _, arg = text.partition(":")
    family = family.strip().lower()
    if family == "perm":
        degree_text, _, gens_text = arg.partition(":")
        degree = _parse_int(degree_text, spec)
        gens = [parse_cycles(chunk, degree) for chunk in gens_text.split(";") if chunk.strip()]
        return perm_closure(gens or [tuple(range(degree))], degree, table_cap, spec=text)

    builders = {
        "cyclic": cyclic,
        "ea2": elementary_abelian_2,
        "dihedral": dihedral,
        "sym": symmetric,
        "gl2": gl2,
    }
    if family not in builders:
        raise SpecError(f"unknown group family in spec {spec!r}")
    return builders[family](_parse_int(arg, spec), table_cap=table_cap)


@lru_cache(maxsize=64)
def _build_cached(spec: str, table_cap: int) -> FiniteGroup:
    G = _construct(spec, table_cap)
    check_group_axioms(G)
    logger.info(f"✅ Built {G.spec} (order {G.order}, table={'yes' if G.has_table else 'no'})")
    return G


def build_group(spec: str, table_cap: Optional[int] = None) -> FiniteGroup:
    """
    Build a group from a group spec string and verify the group axioms.

    Examples: ``cyclic:6``, ``ea2:16``, ``sym:4``, ``gl2:3``, ``dihedral:8``,
    ``prod(sym:3,cyclic:2)``, ``perm:4:(1 2);(1 2 3 4)``.
    """
    cap = get_settings().table_cap if table_cap is None else table_cap
    return _build_cached(spec.strip(), cap)


# ----------------------------------------------------------------------
# Actions
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupAction:
    """Right action of ``group`` on the points 0..domain_size-1."""

    group: FiniteGroup
    domain_size: int
    act: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        if self.act.shape != (self.domain_size, self.group.order):
            raise SpecError(
                f"action table shape {self.act.shape} != ({self.domain_size}, {self.group.order})"
            )

    def point(self, omega: IndexLike, g: IndexLike) -> np.ndarray:
        return self.act[np.asarray(omega), np.asarray(g)]

    def is_semiregular(self) -> bool:
        fixed = self.act == np.arange(self.domain_size)[:, None]
        return bool(np.all(fixed.sum(axis=1) == 1))

    def validate(self, seed: int = 0) -> None:
        """Identity and compatibility checks (full up to 10^7 triples, sampled beyond)."""
        G = self.group
        points = np.arange(self.domain_size)
        check(bool(np.all(self.act[:, G.identity] == points)), f"{self.name}: identity does not act trivially")
        if self.domain_size * G.order ** 2 <= 10_000_000:
            omega = points[:, None, None]
            g = G.elements()[None, :, None]
            h = G.elements()[None, None, :]
        else:
            rng = np.random.default_rng(seed)
            omega = rng.integers(0, self.domain_size, SAMPLED_TRIPLES)
            g, h = rng.integers(0, G.order, size=(2, SAMPLED_TRIPLES))
        lhs = self.act[self.act[omega, g], h]
        rhs = self.act[omega, G.compose(g, h)]
        check(bool(np.all(lhs == rhs)), f"{self.name}: action is not compatible with multiplication")


def regular_action(G: FiniteGroup) -> GroupAction:
    """Right regular action act[ω][g] = ω·g."""
    return GroupAction(group=G, domain_size=G.order, act=G.mul, name=f"regular({G.spec})")


def natural_action(G: FiniteGroup) -> GroupAction:
    """Action of a permutation group on its points, act[ω][g] = g(ω)."""
    if G.perms is None:
        raise SpecError(f"{G.spec} is not a permutation group")
    act = np.ascontiguousarray(G.perms.T)
    return GroupAction(group=G, domain_size=G.perms.shape[1], act=act, name=f"natural({G.spec})")


# ----------------------------------------------------------------------
# Subsets
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Subset:
    """Sorted distinct element indices over a universe of the given size."""

    universe_size: int
    members: Tuple[int, ...]
    _lookup: FrozenSet[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.universe_size < 1:
            raise SpecError("universe size must be positive")
        prev = -1
        for m in self.members:
            if m <= prev:
                raise SpecError("subset members must be strictly increasing")
            prev = m
        if self.members and self.members[-1] >= self.universe_size:
            raise SpecError(f"member {self.members[-1]} outside universe of size {self.universe_size}")
        object.__setattr__(self, "_lookup", frozenset(self.members))

    @classmethod
    def of(cls, universe_size: int, items: Iterable[int]) -> "Subset":
        return cls(universe_size, tuple(sorted({int(x) for x in items})))

    @classmethod
    def full(cls, universe_size: int) -> "Subset":
        return cls(universe_size, tuple(range(universe_size)))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, item: object) -> bool:
        return item in self._lookup

    def as_array(self) -> np.ndarray:
        return np.fromiter(self.members, dtype=np.int64, count=len(self.members))

    def mask(self) -> np.ndarray:
        flags = np.zeros(self.universe_size, dtype=bool)
        flags[self.as_array()] = True
        return flags

    def is_full(self) -> bool:
        return len(self.members) == self.universe_size


def parse_subset(text: str, universe_size: int) -> Subset:
    """Parse '0,1,3,7' (or '@path' to a file of whitespace/comma separated indices)."""
    body = text.strip()
    if body.startswith("@"):
        with open(body[1:], "r", encoding="utf-8") as handle:
            body = handle.read()
    tokens = [tok for tok in re.split(r"[\s,]+", body) if tok]
    try:
        return Subset.of(universe_size, (int(tok) for tok in tokens))
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"malformed subset {text!r}")
