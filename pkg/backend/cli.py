"""
Energy Lab CLI
==============
모든 연산을 서브커맨드로 노출하는 단일 진입점

Features:
- JSON (기본) / CSV 출력, stdout 또는 --out 파일
- 모든 결과에 config 에코 + 시드 포함 (재실행 시 동일 payload)
- 에러는 stderr 에 한 줄 JSON 객체, 종류별 종료 코드
- --threads, --cap-* 플래그가 환경 변수보다 우선
"""

import argparse
import logging
import sys
import time
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from core.cayley import (
    ball,
    ball_universe,
    density_profile,
    filtration_convergence,
    model_energy,
    parse_model_spec,
)
from core.energy import action_energy, inverse_subset, multiplicative_energy, product_set
from core.errors import EnergyLabError, SpecError, UsageError, ValidationFailure
from core.expectation import (
    ConstantMode,
    Method,
    action_expectation_bounds,
    asymptotic_from_invariants,
    corrected_closed_form,
    expected_energy,
    independent_action_expectation,
    multiplicative_bounds,
    printed_closed_form,
)
from core.experiments import (
    basis_search,
    dominance_experiment,
    locally_finite_thin_set,
    power_cover,
    thin_basis_demo,
)
from core.group_core import FiniteGroup, Subset, build_group, natural_action, parse_subset, regular_action
from core.invariants import Variant, compute_invariants, max_centralizer_in_subset
from core.log_config import setup_logging
from core.sampler import FiniteUniverse, SamplingConfig, Statistic, Universe, brute_force_expected, mc_expected
from core.settings import LabSettings, get_settings
from core.validation import BATTERY, OracleBattery
from models.schemas import ErrorEnvelope, RunRecord, dumps, jsonable

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "group-info", "energy", "exact-expectation", "mc-estimate", "brute-force", "ball-densities",
    "dominance", "basis-search", "power-cover", "thin-basis", "locally-finite", "validate",
)

Result = Tuple[Any, Optional[pd.DataFrame]]


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--out", help="write the payload to this path instead of stdout")
    parser.add_argument("--threads", type=int, help="parallel width (default: ENERGY_LAB_THREADS or CPU count)")
    parser.add_argument("--cap-table", type=int, dest="cap_table")
    parser.add_argument("--cap-enum", type=int, dest="cap_enum")
    parser.add_argument("--cap-brute", type=int, dest="cap_brute")
    parser.add_argument("--cap-ball", type=int, dest="cap_ball")
    parser.add_argument("--cap-pair", type=int, dest="cap_pair")
    parser.add_argument("--cap-action", type=int, dest="cap_action")
    parser.add_argument("--log-level")
    parser.add_argument("--log-json", action="store_true", default=None)


def _universe_args(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--group", help="finite group spec, e.g. sym:4")
    source.add_argument("--model", help="infinite model spec, e.g. free:2")
    parser.add_argument("--radius", type=int, help="ball radius for --model")
    parser.add_argument("--subset", help="restrict a finite group to F (indices or @file)")


class LabArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as UsageError so they reach stderr as one JSON line."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog="energy-lab", description="Expected energies of random subsets of groups")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("group-info", help="order, κ, ε, ι, cp, sq of a finite group")
    p.add_argument("--group", required=True)
    p.add_argument("--labels", action="store_true", help="include element labels")
    _common(p)

    p = sub.add_parser("energy", help="multiplicative or action energy of explicit sets")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--group")
    source.add_argument("--model")
    p.add_argument("--a", required=True, help="indices (group) or ';'-separated words (model)")
    p.add_argument("--b", help="second set for E(A, B) (group only)")
    p.add_argument("--d", help="Δ: domain points (with --action) or words (model)")
    p.add_argument("--action", choices=("regular", "natural"), default="regular")
    p.add_argument("--variant", choices=("AA", "AAINV"), default="AA")
    p.add_argument("--histogram", action="store_true")
    _common(p)

    p = sub.add_parser("exact-expectation", help="exact expected energy of a random k-subset")
    p.add_argument("--group", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="AA")
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.BINOMIAL_Q.value)
    p.add_argument("--subset", help="F (indices or @file); defaults to the whole group")
    p.add_argument("--enumerate", action="store_true", help="enumerate triples instead of the closed-form counts")
    p.add_argument("--h", type=int, help="|Δ| for the ACTION variant")
    p.add_argument("--action", choices=("regular", "natural"), default="regular")
    p.add_argument("--phi", help="Φ ⊆ domain for the ACTION variant")
    p.add_argument("--bounds", choices=[c.value for c in ConstantMode], help="also report the bound pair")
    _common(p)

    p = sub.add_parser("mc-estimate", help="seeded Monte Carlo estimate of a statistic")
    _universe_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--statistic", choices=[s.value for s in Statistic], default=Statistic.ENERGY_AA.value)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=_fraction, help="c for RATIO_EVENT")
    p.add_argument("--h", type=int, help="|Δ| for ENERGY_ACTION")
    p.add_argument("--action", choices=("regular", "natural"), default="regular")
    p.add_argument("--custom", help="registered CUSTOM statistic name")
    _common(p)

    p = sub.add_parser("brute-force", help="exact average over every k-subset")
    _universe_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--statistic", choices=[s.value for s in Statistic if s != Statistic.ENERGY_ACTION],
                   default=Statistic.ENERGY_AA.value)
    p.add_argument("--threshold", type=_fraction)
    p.add_argument("--custom")
    _common(p)

    p = sub.add_parser("ball-densities", help="per-radius ball sizes and cp / sq / ι densities")
    p.add_argument("--model", required=True)
    p.add_argument("--n-max", type=int, required=True, dest="n_max")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filtration-k", type=int, dest="filtration_k",
                   help="also report the finite filtration expectation for this k")
    p.add_argument("--variant", choices=("AA", "AAINV"), default="AA")
    _common(p)

    p = sub.add_parser("dominance", help="sum/difference dominance probabilities")
    _universe_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=_fraction, action="append", help="extra threshold (repeatable)")
    p.add_argument("--c", type=_fraction, default=Fraction(9, 10))
    _common(p)

    p = sub.add_parser("basis-search", help="randomized search for an almost additive basis")
    p.add_argument("--group", required=True)
    p.add_argument("--h", dest="h_tag", choices=("log2", "sqrtlog", "const"), default="log2")
    p.add_argument("--epsilon", type=_fraction, default=Fraction(1, 10))
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-prefilter", action="store_true", dest="no_prefilter")
    _common(p)

    p = sub.add_parser("power-cover", help="sizes of A, A*², ..., A*^m")
    p.add_argument("--group", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--m", type=int, default=6)
    _common(p)

    p = sub.add_parser("thin-basis", help="density of the squares and of their sumset")
    p.add_argument("--n", type=int, required=True)
    _common(p)

    p = sub.add_parser("locally-finite", help="thin set with a dense square along a chain of finite groups")
    p.add_argument("--chain", choices=("ea2", "sym"), required=True)
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--h", dest="h_tag", choices=("log2", "sqrtlog", "const"), default="const")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    _common(p)

    p = sub.add_parser("validate", help="run the oracle battery")
    p.add_argument("--groups", nargs="*", help="override the battery group list")
    p.add_argument("--max-k", type=int, default=6, dest="max_k")
    p.add_argument("--with-mc", action="store_true", dest="with_mc", help="include the slow Monte Carlo checks")
    p.add_argument("--mc-trials", type=int, default=100_000, dest="mc_trials")
    p.add_argument("--seed", type=int, default=0)
    _common(p)
    return parser


def effective_settings(args: argparse.Namespace) -> LabSettings:
    return get_settings().with_overrides(
        threads=args.threads,
        table_cap=args.cap_table,
        enum_cap=args.cap_enum,
        brute_cap=args.cap_brute,
        ball_cap=args.cap_ball,
        pair_cap=args.cap_pair,
        action_cap=args.cap_action,
        log_level=args.log_level,
        log_json=args.log_json,
    )


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------

def _action(G: FiniteGroup, kind: str):
    return natural_action(G) if kind == "natural" else regular_action(G)


def _universe(args: argparse.Namespace, settings: LabSettings) -> Tuple[Universe, Optional[FiniteGroup]]:
    if args.group:
        G = build_group(args.group, settings.table_cap)
        F = parse_subset(args.subset, G.order) if args.subset else None
        action = None
        if getattr(args, "statistic", None) == Statistic.ENERGY_ACTION.value:
            action = _action(G, args.action)
        return FiniteUniverse(G, F, action=action), G
    if args.radius is None:
        raise SpecError("--model needs --radius")
    model = parse_model_spec(args.model)
    return ball_universe(ball(model, args.radius, cap=settings.ball_cap)), None


def _parse_words(model, text: str) -> List:
    words = [w.strip() for w in text.split(";")]
    elements = []
    for word in words:
        labels = word.split() if " " in word else list(word)
        try:
            elements.append(model.evaluate_word(labels))
        except KeyError as exc:
            raise SpecError(f"unknown generator {exc} in word {word!r} for {model.name}")
    return elements


# ----------------------------------------------------------------------
# Subcommand handlers
# ----------------------------------------------------------------------

def cmd_group_info(args, settings) -> Result:
    G = build_group(args.group, settings.table_cap)
    inv = compute_invariants(G)
    payload = {
        "group": G.spec,
        "family": G.family_tag,
        "is_abelian": G.is_abelian,
        "has_table": G.has_table,
        **inv.to_dict(),
    }
    if args.labels:
        payload["labels"] = G.labels
    frame = pd.DataFrame([{k: str(v) if isinstance(v, Fraction) else v
                           for k, v in payload.items() if k != "labels"}])
    return payload, frame


def cmd_energy(args, settings) -> Result:
    if args.model:
        model = parse_model_spec(args.model)
        A = _parse_words(model, args.a)
        D = _parse_words(model, args.d) if args.d else A
        report = model_energy(model, A, D)
        return {"model": model.name, **report.to_dict(args.histogram)}, None

    G = build_group(args.group, settings.table_cap)
    A = parse_subset(args.a, G.order)
    payload: Dict[str, Any] = {"group": G.spec}
    if args.d:
        action = _action(G, args.action)
        D = parse_subset(args.d, action.domain_size)
        report = action_energy(A, D, action)
        payload["action"] = action.name
    else:
        B = parse_subset(args.b, G.order) if args.b else A
        if args.variant == Variant.AAINV.value:
            B = inverse_subset(B, G)
        report = multiplicative_energy(A, B, G)
        payload["variant"] = args.variant
        payload["product_set_size"] = len(product_set(A, B, G))
    payload.update(report.to_dict(args.histogram))
    return payload, None


def cmd_exact_expectation(args, settings) -> Result:
    G = build_group(args.group, settings.table_cap)
    variant = Variant(args.variant)
    F = parse_subset(args.subset, G.order) if args.subset else None
    payload: Dict[str, Any] = {"group": G.spec}

    if variant == Variant.ACTION:
        if not args.h:
            raise SpecError("the ACTION variant needs --h")
        action = _action(G, args.action)
        Phi = parse_subset(args.phi, action.domain_size) if args.phi else None
        result = independent_action_expectation(action, args.k, args.h, F=F, Phi=Phi, cap=settings.action_cap)
        payload.update(result.to_dict())
        if args.bounds:
            phi_size = len(Phi) if Phi is not None else action.domain_size
            payload["bounds"] = action_expectation_bounds(args.k, args.h, phi_size, ConstantMode(args.bounds)).to_dict()
        return payload, None

    method = Method(args.method)
    if method == Method.BINOMIAL_Q:
        result = expected_energy(G, args.k, variant, F=F, enumerate_triples=args.enumerate,
                                 cap=settings.enum_cap, threads=settings.threads)
    elif F is not None and not F.is_full():
        raise SpecError("closed forms apply to the whole group only")
    elif method == Method.PRINTED_CLOSED_FORM:
        result = printed_closed_form(G, args.k, variant)
    else:
        result = corrected_closed_form(G, args.k, variant)
    payload.update(result.to_dict())

    if F is None or F.is_full():
        payload["asymptotic_prediction"] = asymptotic_from_invariants(compute_invariants(G), args.k, variant)
    if args.bounds:
        F_full = F or Subset.full(G.order)
        payload["bounds"] = multiplicative_bounds(
            args.k, len(F_full), max_centralizer_in_subset(G, F_full), variant, ConstantMode(args.bounds)
        ).to_dict()
    return payload, None


def _sampling_config(args, settings) -> SamplingConfig:
    return SamplingConfig(
        seed=args.seed,
        trials=args.trials,
        k=args.k,
        statistic=Statistic(args.statistic),
        threshold=args.threshold,
        h=args.h,
        custom=args.custom,
        threads=settings.threads,
    )


def cmd_mc_estimate(args, settings) -> Result:
    universe, _ = _universe(args, settings)
    estimate = mc_expected(universe, _sampling_config(args, settings))
    return {"universe": universe.name, **estimate.to_dict()}, None


def cmd_brute_force(args, settings) -> Result:
    universe, _ = _universe(args, settings)
    value = brute_force_expected(universe, args.k, Statistic(args.statistic), threshold=args.threshold,
                                 custom=args.custom, cap=settings.brute_cap)
    return {"universe": universe.name, "k": args.k, "statistic": args.statistic, "value": value}, None


def cmd_ball_densities(args, settings) -> Result:
    model = parse_model_spec(args.model)
    profile = density_profile(model, args.n_max, exact_pair_cap=settings.pair_cap,
                              pair_samples=settings.pair_samples, seed=args.seed, cap=settings.ball_cap)
    frame = profile.to_dataframe()
    payload: Dict[str, Any] = {
        "model": model.name,
        "seed": args.seed,
        "rows": profile.to_records(),
    }
    if args.filtration_k:
        payload["filtration"] = filtration_convergence(model, range(1, args.n_max + 1), args.filtration_k,
                                                       Variant(args.variant))
    return payload, frame


def cmd_dominance(args, settings) -> Result:
    universe, G = _universe(args, settings)
    invariants = compute_invariants(G) if G is not None and not args.subset else None
    config = SamplingConfig(seed=args.seed, trials=args.trials, k=args.k, threads=settings.threads)
    report = dominance_experiment(universe, args.k, config, thresholds=args.threshold, c=args.c,
                                  invariants=invariants)
    return report.to_dict(), report.to_dataframe()


def cmd_basis_search(args, settings) -> Result:
    G = build_group(args.group, settings.table_cap)
    result = basis_search(G, args.h_tag, args.epsilon, args.budget, seed=args.seed,
                          prefilter=not args.no_prefilter)
    return result.to_dict(), None


def cmd_power_cover(args, settings) -> Result:
    G = build_group(args.group, settings.table_cap)
    profile = power_cover(G, parse_subset(args.a, G.order), args.m)
    frame = pd.DataFrame({"m": range(1, len(profile.sizes) + 1), "size": profile.sizes})
    return profile.to_dict(), frame


def cmd_thin_basis(args, settings) -> Result:
    report = thin_basis_demo(args.n)
    frame = pd.DataFrame([{k: str(v) if isinstance(v, Fraction) else v for k, v in report.to_dict().items()}])
    return report.to_dict(), frame


def cmd_locally_finite(args, settings) -> Result:
    report = locally_finite_thin_set(args.chain, args.stages, args.h_tag, args.budget, seed=args.seed)
    return report.to_dict(), report.to_dataframe()


def cmd_validate(args, settings) -> Result:
    battery = OracleBattery(
        groups=args.groups or BATTERY,
        max_k=args.max_k,
        brute_cap=settings.brute_cap,
        include_mc=args.with_mc,
        mc_trials=args.mc_trials,
        seed=args.seed,
        threads=settings.threads,
    )
    results = battery.run()
    if results is None:
        raise ValidationFailure("oracle battery aborted")
    if results["failed"]:
        failure = ValidationFailure(f"{results['failed']} of {results['total_checks']} exact checks failed")
        failure.results = results
        raise failure
    results.pop("wall_time", None)
    return results, battery.to_dataframe()


HANDLERS: Dict[str, Callable[[argparse.Namespace, LabSettings], Result]] = {
    "group-info": cmd_group_info,
    "energy": cmd_energy,
    "exact-expectation": cmd_exact_expectation,
    "mc-estimate": cmd_mc_estimate,
    "brute-force": cmd_brute_force,
    "ball-densities": cmd_ball_densities,
    "dominance": cmd_dominance,
    "basis-search": cmd_basis_search,
    "power-cover": cmd_power_cover,
    "thin-basis": cmd_thin_basis,
    "locally-finite": cmd_locally_finite,
    "validate": cmd_validate,
}


# ----------------------------------------------------------------------
# Entry points
# ----------------------------------------------------------------------

_OUTPUT_KEYS = {"format", "out", "log_level", "log_json", "subcommand"}


def _config_echo(args: argparse.Namespace, settings: LabSettings) -> Dict[str, Any]:
    echo = {k: v for k, v in vars(args).items() if k not in _OUTPUT_KEYS and not k.startswith("cap_")}
    echo["threads"] = settings.threads
    echo["caps"] = {
        "table": settings.table_cap,
        "enum": settings.enum_cap,
        "brute": settings.brute_cap,
        "ball": settings.ball_cap,
        "pair": settings.pair_cap,
        "pair_samples": settings.pair_samples,
        "action": settings.action_cap,
    }
    return echo


def dispatch(argv: Optional[Sequence[str]] = None) -> Tuple[RunRecord, Optional[pd.DataFrame], argparse.Namespace]:
    """Parse ``argv``, run the subcommand and return its RunRecord (plus the CSV table, if any)."""
    args = build_parser().parse_args(argv)
    settings = effective_settings(args)
    setup_logging(settings.log_level, settings.log_json)

    started = time.perf_counter()
    payload, frame = HANDLERS[args.subcommand](args, settings)
    record = RunRecord(
        subcommand=args.subcommand,
        config=jsonable(_config_echo(args, settings)),
        wall_time=round(time.perf_counter() - started, 3),
        payload=jsonable(payload),
    )
    return record, frame, args


def emit(record: RunRecord, frame: Optional[pd.DataFrame], fmt: str, out: Optional[str]) -> None:
    if fmt == "csv":
        if frame is None:
            frame = pd.json_normalize(record.payload)
        text = frame.to_csv(index=False)
    else:
        text = record.to_json() + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info(f"✅ Wrote {record.subcommand} output to {out}")
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Exit code 0 only when a payload was produced and every self-check passed."""
    try:
        record, frame, args = dispatch(argv)
        emit(record, frame, args.format, args.out)
        return 0
    except EnergyLabError as e:
        results = getattr(e, "results", None)
        if results is not None:
            sys.stdout.write(dumps(results) + "\n")
        sys.stderr.write(ErrorEnvelope(**e.to_dict()).model_dump_json() + "\n")
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ Unexpected failure: {e}", exc_info=True)
        envelope = ErrorEnvelope(error="internal_error", message=str(e), exit_code=1)
        sys.stderr.write(envelope.model_dump_json() + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
