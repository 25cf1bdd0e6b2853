"""Command-line entry point: ``vmauction <command> ...``.

Exit codes: 0 when every checked property holds, 1 when one fails, 2 on
usage errors (bad flags, malformed instances, unknown mechanisms).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .additive import DEFAULT_LARGE_MARKET_C, large_market_holds
from .audit import (
    DEFAULT_FACTORS,
    DeviationGrid,
    additive_tau_lemma_checks,
    concentration_check,
    exact_expected_revenue,
    heavy_light_split,
    public_budget_lemma_checks,
    ratio_report,
    structural_checks,
    truthfulness_audit,
)
from .generate import GeneratorKind, GeneratorSpec, generate
from .mechanisms import MECHANISMS, ConfigurationError, get_mechanism, run_mechanism
from .model import (
    Branch,
    CoinRealization,
    DimensionError,
    InstanceFormatError,
    ParameterError,
    PrivacyModel,
    SizeError,
    dump_instance,
    fmt,
    load_instance,
    outcome_to_dict,
    revenue,
    to_fraction,
    validate_outcome,
)

CSV_COLUMNS = ["instance", "mechanism", "revenue", "opt", "ratio", "bound", "pass", "assumption_flags"]
USAGE_ERRORS = (ParameterError, ConfigurationError, InstanceFormatError, DimensionError, SizeError, OSError,
                ValueError)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _rational(text: str) -> Fraction:
    try:
        return to_fraction(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _interval(text: str) -> tuple[Fraction, Fraction]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO,HI")
    return _rational(parts[0]), _rational(parts[1])


def _factors(text: str) -> tuple[Fraction, ...]:
    return tuple(_rational(t) for t in text.split(",") if t.strip())


def parse_coins(text: str, n: int) -> CoinRealization:
    """``indivisible`` or ``sampling:S=1,3`` (1-based agent indices, possibly empty)."""
    text = text.strip()
    if text == "indivisible":
        return CoinRealization.indivisible(n)
    if text.startswith("sampling:S="):
        body = text[len("sampling:S="):]
        try:
            members = [int(t) - 1 for t in body.split(",") if t.strip()]
        except ValueError:
            raise UsageError(f"bad coin string {text!r}") from None
        if any(not 0 <= i < n for i in members):
            raise UsageError(f"coin string {text!r} names an agent outside 1..{n}")
        return CoinRealization.sampling(n, members)
    raise UsageError(f"bad coin string {text!r}; use 'indivisible' or 'sampling:S=1,3'")


def draw_coins(mech_id: str, n: int, seed: int) -> CoinRealization:
    """Coins drawn from PCG64 with the given seed, exactly at the mechanism's branch probability."""
    info = get_mechanism(mech_id)
    rng = np.random.Generator(np.random.PCG64(seed))
    q = info.indivisible_prob or Fraction(0)
    pick = int(rng.integers(0, q.denominator))
    bits = rng.integers(0, 2, size=n)
    if pick < q.numerator:
        return CoinRealization(Branch.INDIVISIBLE, (False,) * n, seed)
    return CoinRealization(Branch.SAMPLING, tuple(bool(b) for b in bits), seed)


def _params(args) -> dict[str, Any]:
    return {
        "epsilon": getattr(args, "epsilon", None),
        "clip": getattr(args, "clip", None),
        "buyer": getattr(args, "buyer", None),
        "large_market_c": getattr(args, "large_market_c", None),
    }


def _check_required(mech_id: str, params: dict) -> None:
    for name in get_mechanism(mech_id).required:
        if params.get(name) is None:
            raise UsageError(f"{mech_id} requires --{name}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit_text(text: str, out: Optional[str]) -> None:
    if out:
        _write(Path(out), text)
    else:
        sys.stdout.write(text)


def _emit(obj: Any, out: Optional[str]) -> None:
    _emit_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    spec = GeneratorSpec(
        kind=GeneratorKind(args.kind), n=args.n, m=args.m, seed=args.seed,
        value_range=args.value_range, budget_range=args.budget_range, tau_range=args.tau_range,
        large_market_c=args.large_market_c, divisible=not args.indivisible, denominator=args.denominator,
    )
    _emit_text(dump_instance(generate(spec)), args.out)
    return 0


def cmd_run(args) -> int:
    instance = load_instance(args.instance)
    params = _params(args)
    _check_required(args.mechanism, params)
    info = get_mechanism(args.mechanism)
    if args.expect:
        value = exact_expected_revenue(args.mechanism, instance, params)
        _emit({"mechanism": args.mechanism, "expected_revenue": fmt(value)}, args.out)
        return 0
    if args.coins:
        coins = parse_coins(args.coins, instance.n)
    elif info.randomized:
        coins = draw_coins(args.mechanism, instance.n, args.seed)
    else:
        coins = None
    out = run_mechanism(args.mechanism, instance, coins, params)
    violations = validate_outcome(instance, out)
    result = {
        "mechanism": args.mechanism,
        "coins": coins.describe() if coins is not None and info.randomized else None,
        "outcome": outcome_to_dict(out),
        "revenue": fmt(revenue(out)),
        "feasible": not violations,
        "violations": [f"{v.kind} {','.join(str(k + 1) for k in v.index)}: {v.detail}" for v in violations],
        "flags": list(info.flags),
    }
    if args.mechanism == "add-large-market":
        c = args.large_market_c or DEFAULT_LARGE_MARKET_C
        result["large_market_assumption"] = large_market_holds(instance, c)
    _emit(result, args.out)
    return 0 if not violations else 1


def _privacy(text: Optional[str], mech_id: str) -> PrivacyModel:
    if not text:
        return get_mechanism(mech_id).privacy
    fields = {t.strip() for t in text.split(",") if t.strip()}
    unknown = fields - {"budget", "values", "tau"}
    if unknown:
        raise UsageError(f"unknown private field(s): {', '.join(sorted(unknown))}")
    return PrivacyModel("budget" in fields, "values" in fields, "tau" in fields)


def _grid(args) -> DeviationGrid:
    f = args.factors or DEFAULT_FACTORS
    return DeviationGrid(f, f, f, joint=args.joint)


def cmd_audit(args) -> int:
    instance = load_instance(args.instance)
    params = _params(args)
    _check_required(args.mechanism, params)
    verdict = truthfulness_audit(args.mechanism, instance, _privacy(args.privacy, args.mechanism), _grid(args),
                                 params=params, workers=args.workers, sample_size=args.sample, seed=args.seed)
    _emit(verdict.to_dict(), args.out)
    return 0 if verdict.passed else 1


def _report_one(job) -> tuple[list[dict], dict[str, dict], list[str]]:
    path, name, mechs, params, do_audit, sample = job
    instance = load_instance(path)
    rows, audits, skipped = [], {}, []
    for mech in mechs:
        try:
            rep = ratio_report(mech, instance, params=params, instance_id=name)
        except (DimensionError, SizeError) as exc:
            skipped.append(f"{name} {mech}: {exc}")
            continue
        rows.append(rep.row())
        if do_audit:
            v = truthfulness_audit(mech, instance, params=params, sample_size=sample if instance.n > 12 else None)
            audits[mech] = v.to_dict()
    return rows, audits, skipped


def cmd_report(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise UsageError(f"corpus directory not found: {corpus}")
    mechs = [m.strip() for m in args.mechanisms.split(",") if m.strip()]
    params = _params(args)
    for m in mechs:
        _check_required(m, params)
    files = sorted(corpus.glob("*.json"))
    jobs = [(str(p), p.stem, mechs, params, not args.no_audit, args.audit_sample) for p in files]
    if args.workers > 1 and jobs:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_report_one, jobs))
    else:
        results = [_report_one(j) for j in jobs]

    rows = sorted((r for res in results for r in res[0]), key=lambda r: (r["instance"], r["mechanism"]))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    out = Path(args.out)
    _write(out, buf.getvalue())

    ok = all(r["pass"] == "true" for r in rows)
    if not args.no_audit:
        audit_dir = Path(args.audit_dir) if args.audit_dir else out.parent
        audit_dir.mkdir(parents=True, exist_ok=True)
        for mech in mechs:
            per_instance = {name: res[1][mech] for (name, res) in zip((p.stem for p in files), results)
                            if mech in res[1]}
            deviations = sum(len(v["deviations"]) for v in per_instance.values())
            passed = all(v["passed"] for v in per_instance.values())
            if not get_mechanism(mech).expected_truthful:
                # sensitivity: one deviation anywhere in the corpus is enough
                passed = deviations > 0 or not per_instance
            ok &= passed
            summary = {
                "mechanism": mech,
                "expected_truthful": get_mechanism(mech).expected_truthful,
                "instances": len(per_instance),
                "deviations_found": deviations,
                "passed": passed,
                "note": "finite misreport grid: an empty list is evidence, not proof",
                "per_instance": per_instance,
            }
            (audit_dir / f"audit-{mech}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for res in results:
        for line in res[2]:
            print(f"skipped {line}", file=sys.stderr)
    return 0 if ok else 1


def cmd_check_lemmas(args) -> int:
    instance = load_instance(args.instance)
    result: dict[str, Any] = {}
    ok = True
    if instance.n <= 10:
        rep = structural_checks(instance, args.clip or Fraction(1, 2))
        result["greedy_clip"] = rep.to_dict()
        ok &= rep.passed
    else:
        result["greedy_clip"] = "skipped: n > 10"
    split = heavy_light_split(instance)
    result["heavy_light"] = {"beta": fmt(split.beta), "heavy_items": [j + 1 for j in split.heavy_items],
                             "heavy_revenue": fmt(split.heavy_revenue), "light_revenue": fmt(split.light_revenue)}
    if args.epsilon is not None:
        if instance.m == 1:
            pb = public_budget_lemma_checks(instance, args.epsilon)
            result["public_budget"] = {"checks": pb.checks, "failures": pb.failures}
            ok &= pb.passed
        tl = additive_tau_lemma_checks(instance, args.epsilon)
        result["additive_tau"] = {"checks": tl.checks, "failures": tl.failures}
        ok &= tl.passed
    result["passed"] = ok
    _emit(result, args.out)
    return 0 if ok else 1


def cmd_concentration(args) -> int:
    instance = load_instance(args.instance)
    res = concentration_check(instance, args.trials, args.seed, force_monte_carlo=args.monte_carlo)
    _emit(res.to_dict(), args.out)
    return 1 if res.status == "fail" else 0


# ---------------------------------------------------------------------------
# parser


def _mechanism_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=_rational, help="rounding parameter for single-alg6 and add-alg7")
    p.add_argument("--clip", type=_rational, help="supply clipping threshold in (0,1), default 1/2")
    p.add_argument("--buyer", choices=["value", "ql"], help="buyer kind for add-lx (default value)")
    p.add_argument("--large-market-c", type=_rational, help="large-market constant c (default 64)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmauction", description="Auctions for budget and RoS constrained "
                                                                   "value maximizers.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--kind", default="uniform", choices=[k.value for k in GeneratorKind])
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--value-range", type=_interval, default=(Fraction(0), Fraction(10)))
    g.add_argument("--budget-range", type=_interval, default=(Fraction(1), Fraction(10)))
    g.add_argument("--tau-range", type=_interval, default=(Fraction(1, 2), Fraction(2)))
    g.add_argument("--large-market-c", type=_rational, default=DEFAULT_LARGE_MARKET_C)
    g.add_argument("--denominator", type=int, default=20)
    g.add_argument("--indivisible", action="store_true")
    g.add_argument("-o", "--out")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run one mechanism on one instance")
    r.add_argument("mechanism", choices=list(MECHANISMS))
    r.add_argument("instance")
    _mechanism_flags(r)
    r.add_argument("--coins", help="'indivisible' or 'sampling:S=1,3' (1-based)")
    r.add_argument("--seed", type=int, default=0, help="PCG64 seed for coins when --coins is absent")
    r.add_argument("--expect", action="store_true", help="print the exact expected revenue instead")
    r.add_argument("-o", "--out")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="search for profitable misreports")
    a.add_argument("mechanism", choices=list(MECHANISMS))
    a.add_argument("instance")
    _mechanism_flags(a)
    a.add_argument("--privacy", help="comma list of private fields (budget,values,tau)")
    a.add_argument("--factors", type=_factors, help="misreport factors, e.g. 1/2,2")
    a.add_argument("--joint", action="store_true", help="cross misreports of different fields")
    a.add_argument("--sample", type=int, help="audit this many sampled coin outcomes instead of all")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("-o", "--out")
    a.set_defaults(func=cmd_audit)

    rp = sub.add_parser("report", help="ratio CSV and audit summaries over a corpus")
    rp.add_argument("corpus")
    rp.add_argument("--mechanisms", required=True, help="comma list of mechanism ids")
    rp.add_argument("--out", required=True, help="CSV path")
    rp.add_argument("--audit-dir", help="where audit-<mechanism>.json goes (default: next to the CSV)")
    rp.add_argument("--no-audit", action="store_true")
    rp.add_argument("--audit-sample", type=int, default=64, help="sampled coins for instances with n > 12")
    rp.add_argument("--workers", type=int, default=1)
    _mechanism_flags(rp)
    rp.set_defaults(func=cmd_report)

    c = sub.add_parser("check-lemmas", help="structural lemma checks on one instance")
    c.add_argument("instance")
    c.add_argument("--epsilon", type=_rational)
    c.add_argument("--clip", type=_rational)
    c.add_argument("-o", "--out")
    c.set_defaults(func=cmd_check_lemmas)

    k = sub.add_parser("concentration", help="probability the sample holds a third to two thirds of OPT")
    k.add_argument("instance")
    k.add_argument("--trials", type=int, default=10000)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--monte-carlo", action="store_true", help="skip exact counting")
    k.add_argument("-o", "--out")
    k.set_defaults(func=cmd_concentration)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
