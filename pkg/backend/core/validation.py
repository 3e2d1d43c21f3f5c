"""
Oracle Battery
==============
정확한 유리수 비교로 전체 엔진을 교차 검증하는 배터리

Features:
- 작은 군 배터리에서 BINOMIAL_Q == 전수조사 (AA / AAINV, 1 <= k <= 6)
- 닫힌 형태 검증: AAINV 그대로 일치, AA 는 보정식 일치 + 출판식과의 차이 = 대각 항
- GL2(q) 불변량, 보조정리 항등식, 평행이동 불변성, k 에 대한 단조성
- 독립 작용 기대값의 등호 사례
- 얇은 기저 밀도, Cayley 공 성장 법칙
- 선택적 몬테카를로 점근 검증 (느림)
"""

import logging
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.cayley import FreeGroup, Heisenberg, Lamplighter, Lattice, ball, ball_energy_mc, density_profile
from core.energy import action_energy
from core.errors import EnergyLabError
from core.expectation import (
    ConstantMode,
    action_expectation_bounds,
    corrected_closed_form,
    diagonal_term,
    expected_energy,
    independent_action_expectation,
    printed_closed_form,
)
from core.experiments import thin_basis_demo
from core.group_core import Subset, build_group, regular_action
from core.invariants import Variant, compute_invariants, fn_overlap_sum
from core.sampler import FiniteUniverse, SamplingConfig, Statistic, brute_force_expected, mc_expected
from core.settings import get_settings

logger = logging.getLogger(__name__)

BATTERY = (
    "cyclic:2", "cyclic:3", "cyclic:4", "cyclic:5", "cyclic:6", "cyclic:7", "cyclic:8",
    "ea2:2", "ea2:3", "ea2:4",
    "sym:3", "sym:4",
    "dihedral:4", "dihedral:5",
    "gl2:2", "gl2:3",
)

GL2_INVARIANTS = {2: (3, 3, 4), 3: (8, 6, 14), 5: (24, 8, 32)}
OVERLAP_SAMPLES = 50
TRANSLATION_SAMPLES = 100


@dataclass(frozen=True)
class CheckResult:
    name: str
    subject: str
    passed: bool
    expected: Any = None
    actual: Any = None
    detail: str = ""

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "subject": self.subject,
            "passed": self.passed,
            "expected": self.expected,
            "actual": self.actual,
            "detail": self.detail,
        }


class OracleBattery:
    """
    검증 배터리

    각 검사는 정확한 값 비교 결과를 CheckResult 로 남기고,
    실행이 끝나면 analyze_results / print_results 로 요약합니다.
    """

    def __init__(self, groups: Sequence[str] = BATTERY, max_k: int = 6, brute_cap: Optional[int] = None,
                 include_mc: bool = False, mc_trials: int = 100_000, seed: int = 0, threads: int = 1):
        self.groups = list(groups)
        self.max_k = max_k
        self.brute_cap = get_settings().brute_cap if brute_cap is None else brute_cap
        self.include_mc = include_mc
        self.mc_trials = mc_trials
        self.seed = seed
        self.threads = threads

        self.checks: List[CheckResult] = []
        self.diagonal_findings: List[Dict] = []
        self.progress = 0
        self.status = "idle"  # idle, running, completed, failed
        self.results: Optional[Dict] = None

    def _record(self, name: str, subject: str, expected: Any, actual: Any,
                passed: Optional[bool] = None, detail: str = "") -> bool:
        ok = (expected == actual) if passed is None else bool(passed)
        self.checks.append(CheckResult(name, subject, ok, expected, actual, detail))
        if not ok:
            logger.error(f"❌ {name} [{subject}]: expected {expected}, got {actual} {detail}".rstrip())
        return ok

    # ------------------------------------------------------------------
    # Exact checks
    # ------------------------------------------------------------------

    def check_oracle(self, spec: str) -> None:
        """BINOMIAL_Q by enumerated triples against brute force, both variants."""
        G = build_group(spec)
        universe = FiniteUniverse(G)
        for k in range(1, min(G.order, self.max_k) + 1):
            if math.comb(G.order, k) > self.brute_cap:
                continue
            for variant, statistic in ((Variant.AA, Statistic.ENERGY_AA), (Variant.AAINV, Statistic.ENERGY_AAINV)):
                exact = expected_energy(G, k, variant, enumerate_triples=True, threads=self.threads).value
                brute = brute_force_expected(universe, k, statistic, cap=self.brute_cap)
                self._record("oracle", f"{spec} k={k} {variant.value}", brute, exact)

    def check_closed_forms(self, spec: str) -> None:
        """AAINV printed form and corrected AA form equal BINOMIAL_Q; printed AA is off by the diagonal term."""
        G = build_group(spec)
        if G.order < 4:
            return
        inv = compute_invariants(G)
        for k in range(1, min(G.order, self.max_k) + 1):
            reference_aa = expected_energy(G, k, Variant.AA, invariants=inv).value
            reference_aainv = expected_energy(G, k, Variant.AAINV, invariants=inv).value
            self._record("closed-form-aainv", f"{spec} k={k}", reference_aainv,
                         printed_closed_form(G, k, Variant.AAINV, inv).value)
            self._record("closed-form-aa-corrected", f"{spec} k={k}", reference_aa,
                         corrected_closed_form(G, k, Variant.AA, inv).value)
            printed = printed_closed_form(G, k, Variant.AA, inv).value
            predicted = diagonal_term(G.order, k)
            self._record("closed-form-aa-diagonal", f"{spec} k={k}", predicted, printed - reference_aa)
            if printed != reference_aa:
                self.diagonal_findings.append({
                    "group": spec, "k": k, "printed": printed, "binomial_q": reference_aa,
                    "difference": printed - reference_aa,
                })

    def check_identities(self, spec: str) -> None:
        """Σ|C_G(y)| = κ|G|, Σ r(g)² = ε|G| and the overlap sum over random symmetric subsets."""
        G = build_group(spec)
        inv = compute_invariants(G)
        n = G.order
        self._record("centralizer-sum", spec, inv.kappa * n, int(inv.centralizer_sizes.sum()))
        self._record("square-root-sum", spec, inv.epsilon * n, int(np.dot(inv.r_profile, inv.r_profile)))
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=(n,))))
        failures = 0
        for _ in range(OVERLAP_SAMPLES):
            pick = rng.random(n) < 0.5
            pick |= pick[G.inv]
            F = Subset.of(n, np.flatnonzero(pick).tolist())
            if fn_overlap_sum(G, F) != len(F) ** 2:
                failures += 1
        self._record("overlap-sum", spec, 0, failures, detail=f"over {OVERLAP_SAMPLES} symmetric subsets")

    def check_translation(self, spec: str, samples: int = TRANSLATION_SAMPLES) -> None:
        """E(Ag, Δ) = E(A, Δ) = E(A, gΔ) under the regular action for random (A, Δ, g)."""
        G = build_group(spec)
        action = regular_action(G)
        n = G.order
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=(n, 1))))
        failures = 0
        for _ in range(samples):
            A = Subset.of(n, rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
            D = Subset.of(n, rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
            g = int(rng.integers(n))
            reference = action_energy(A, D, action).energy
            right = Subset.of(n, G.compose(A.as_array(), g).tolist())
            left = Subset.of(n, G.compose(g, D.as_array()).tolist())
            if (action_energy(right, D, action).energy != reference
                    or action_energy(A, left, action).energy != reference):
                failures += 1
        self._record("translation-invariance", spec, 0, failures, detail=f"over {samples} random triples")

    def check_monotonicity(self, spec: str) -> None:
        """Exact expected energy is strictly increasing in k over 1 <= k <= |G|."""
        G = build_group(spec)
        inv = compute_invariants(G)
        for variant in (Variant.AA, Variant.AAINV):
            values = [expected_energy(G, k, variant, invariants=inv).value for k in range(1, G.order + 1)]
            drops = [k + 1 for k, (a, b) in enumerate(zip(values, values[1:]), start=1) if b <= a]
            self._record("expectation-increasing", f"{spec} {variant.value}", [], drops)

    def check_gl2(self) -> None:
        for q, expected in GL2_INVARIANTS.items():
            inv = compute_invariants(build_group(f"gl2:{q}"))
            self._record("gl2-invariants", f"gl2:{q}", expected, (inv.kappa, inv.epsilon, inv.iota))

    def check_equality_case(self) -> None:
        """Regular action of C6 with k = h = 2 meets the corrected upper bound."""
        value = independent_action_expectation(regular_action(build_group("cyclic:6")), 2, 2).value
        corrected = action_expectation_bounds(2, 2, 6, ConstantMode.ORDERED_CORRECTED)
        printed = action_expectation_bounds(2, 2, 6, ConstantMode.AS_PRINTED)
        self._record("action-equality", "cyclic:6", Fraction(24, 5), value)
        self._record("action-upper-attained", "cyclic:6", corrected.upper, value)
        self._record("action-printed-exceeded", "cyclic:6", True, value > printed.upper,
                     detail=f"printed upper {printed.upper}")

    def check_involution_saturation(self, k: int = 10) -> None:
        G = build_group("ea2:16")
        inv = compute_invariants(G)
        exact = expected_energy(G, k, Variant.AAINV, invariants=inv).value
        self._record("aainv-ea2-16", f"ea2:16 k={k}", exact, printed_closed_form(G, k, Variant.AAINV, inv).value)

    def check_thin_basis(self, n: int = 100_000) -> None:
        report = thin_basis_demo(n)
        self._record("thin-basis-a-density", f"n={n}", True, report.a_density <= Fraction(32, 10000),
                     detail=str(report.a_density))
        self._record("thin-basis-residue-density", f"n={n}", True,
                     abs(report.residue_density - Fraction(3, 4)) <= Fraction(2, 1000),
                     detail=str(report.residue_density))

    def check_growth_laws(self) -> None:
        free = ball(FreeGroup(2), 8)
        self._record("free-ball-sizes", "free:2", [2 * 3 ** r - 1 for r in range(9)],
                     [free.prefix_size(r) for r in range(9)])
        square = ball(Lattice(2), 30)
        self._record("lattice-ball-sizes", "lattice:2", [2 * r * r + 2 * r + 1 for r in range(31)],
                     [square.prefix_size(r) for r in range(31)])
        heisenberg = density_profile(Heisenberg(), 8, exact_pair_cap=0, pair_samples=1000, seed=self.seed)
        self._record("heisenberg-injective-squares", "heisenberg", True,
                     all(row.sq * row.ball_size == 1 for row in heisenberg.rows))
        lamplighter = density_profile(Lamplighter(), 10, exact_pair_cap=0, pair_samples=1000, seed=self.seed)
        iotas = [row.iota for row in lamplighter.rows[3:]]
        self._record("lamplighter-iota-decreasing", "lamplighter", True,
                     all(a > b for a, b in zip(iotas, iotas[1:])), detail=str([str(x) for x in iotas]))

    # ------------------------------------------------------------------
    # Monte Carlo checks
    # ------------------------------------------------------------------

    def check_asymptotics(self) -> None:
        config = SamplingConfig(seed=self.seed, trials=self.mc_trials, k=10, threads=self.threads)
        for variant in (Variant.AA, Variant.AAINV):
            estimate = ball_energy_mc(Lattice(1), 5000, 10, variant, config)
            self._record(f"lattice-1-{variant.value}", "lattice:1 r=5000 k=10", True,
                         estimate.within(190, sigmas=3, relative=0.02), detail=f"mean {estimate.mean:.3f}")
        estimate = mc_expected(FiniteUniverse(build_group("ea2:16")),
                               SamplingConfig(seed=self.seed, trials=self.mc_trials, k=8, threads=self.threads))
        self._record("ea2-16-AA", "ea2:16 k=8", True, estimate.within(176, sigmas=3, relative=0.02),
                     detail=f"mean {estimate.mean:.3f}")
        estimate = ball_energy_mc(FreeGroup(2), 7, 10, Variant.AA, config)
        self._record("free-2-AA", "free:2 r=7 k=10", True, 100 <= estimate.mean <= 105, detail=f"mean {estimate.mean:.3f}")

    # ------------------------------------------------------------------
    # Run / report
    # ------------------------------------------------------------------

    def _steps(self):
        steps = []
        for spec in self.groups:
            steps.append((f"oracle {spec}", lambda s=spec: self.check_oracle(s)))
            steps.append((f"closed forms {spec}", lambda s=spec: self.check_closed_forms(s)))
            steps.append((f"identities {spec}", lambda s=spec: self.check_identities(s)))
            steps.append((f"translation {spec}", lambda s=spec: self.check_translation(s)))
            steps.append((f"monotonicity {spec}", lambda s=spec: self.check_monotonicity(s)))
        steps.append(("gl2 invariants", self.check_gl2))
        steps.append(("action equality case", self.check_equality_case))
        steps.append(("involution saturation", self.check_involution_saturation))
        steps.append(("thin basis", self.check_thin_basis))
        steps.append(("growth laws", self.check_growth_laws))
        if self.include_mc:
            steps.append(("asymptotics", self.check_asymptotics))
        return steps

    def run(self) -> Optional[Dict]:
        """배터리 실행 (동기)"""
        started = time.perf_counter()
        try:
            self.status = "running"
            self.progress = 0
            self.checks = []
            self.diagonal_findings = []

            logger.info("=" * 60)
            logger.info("🚀 Starting oracle battery")
            logger.info(f"   Groups: {', '.join(self.groups)} ({len(self.groups)})")
            logger.info(f"   k <= {self.max_k}, brute-force cap {self.brute_cap:,}, MC: {'ON' if self.include_mc else 'OFF'}")
            logger.info("=" * 60)

            steps = self._steps()
            for idx, (label, step) in enumerate(steps):
                logger.info(f"[{idx + 1}/{len(steps)}] {label}")
                try:
                    step()
                except EnergyLabError as e:
                    self._record(label, label, "completed", e.code, detail=str(e))
                self.progress = int((idx + 1) / len(steps) * 100)

            results = self.analyze_results()
            results["wall_time"] = round(time.perf_counter() - started, 3)
            self.results = results
            self.print_results(results)
            self.status = "completed"
            return results

        except Exception as e:
            logger.error(f"❌ Oracle battery failed: {e}")
            import traceback
            logger.error(traceback.format_exc())
            self.status = "failed"
            return None

    def analyze_results(self) -> Dict:
        """검사 결과 요약"""
        by_name: Dict[str, Dict[str, int]] = {}
        for result in self.checks:
            stats = by_name.setdefault(result.name, {"passed": 0, "failed": 0})
            stats["passed" if result.passed else "failed"] += 1
        failures = [r.to_dict() for r in self.checks if not r.passed]
        return {
            "total_checks": len(self.checks),
            "passed": len(self.checks) - len(failures),
            "failed": len(failures),
            "by_check": by_name,
            "failures": failures,
            "diagonal_findings": self.diagonal_findings,
        }

    def print_results(self, results: Dict) -> bool:
        """결과 출력"""
        logger.info("=" * 60)
        logger.info("📊 ORACLE BATTERY RESULTS")
        logger.info("=" * 60)
        logger.info(f"총 검사 수: {results['total_checks']}")
        logger.info(f"통과: {results['passed']} / 실패: {results['failed']}")
        for name, stats in results["by_check"].items():
            logger.info(f"   {name}: {stats['passed']} passed, {stats['failed']} failed")
        if results["diagonal_findings"]:
            logger.info("📊 Printed AA closed form vs BINOMIAL_Q:")
            for finding in results["diagonal_findings"][:10]:
                logger.info(f"   {finding['group']} k={finding['k']}: printed {finding['printed']}, "
                            f"exact {finding['binomial_q']}, difference {finding['difference']}")
        logger.info("=" * 60)

        if results["failed"] == 0:
            logger.info("✅ All exact checks passed")
            return True
        logger.warning(f"⚠️ {results['failed']} checks failed")
        return False

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([
            {**r.to_dict(), "expected": str(r.expected), "actual": str(r.actual)} for r in self.checks
        ])

    def get_status(self) -> Dict:
        """배터리 상태 조회"""
        return {
            "status": self.status,
            "progress": self.progress,
            "results": self.results,
        }
