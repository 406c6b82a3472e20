"""Command line entry point.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
Data goes to stdout or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources

import numpy as np

from . import constructions as cons
from .config import decimal, load_config, parse_config
from .errors import ConfigError, MixedRatesError
from .oracles import (
    intrinsic_distance,
    max_ir_size,
    min_code_size,
    min_resolvability_size,
    optimal_coding_error,
    optimal_resolvability_distance,
)
from .rates import (
    PROBLEMS,
    Bound,
    coding_second_order,
    intrinsic_second_order,
    resolvability_second_order,
    solve,
)
from .spectrum import exact_classes, mc_spectrum, spectrum_from_classes
from .study import CSV_HEADER, HEURISTIC_NOTE, convergence_study, emit_csv
from .verify import random_mixture, run_checks

LN2 = math.log(2.0)


class UsageError(Exception):
    pass


# -- argument types --------------------------------------------------------------


def _ranged(lo, hi, name):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}")
        if not lo <= value < hi:
            raise argparse.ArgumentTypeError(f"{name} must lie in [{lo}, {hi}), got {text}")
        return value
    return parse


delta_arg = _ranged(0.0, 2.0, "delta")
epsilon_arg = _ranged(0.0, 1.0, "epsilon")


def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def finite_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text}")
    return value


def grid_arg(text):
    try:
        values = [positive_int(t) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated positive integers: {text!r}")
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("grid must be non-empty and strictly increasing")
    return values


# -- output helpers --------------------------------------------------------------


def _plain(value):
    if isinstance(value, Bound):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "+inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _dump(doc) -> str:
    return json.dumps(_plain(doc), indent=2) + "\n"


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc}") from exc


def _budget(args):
    if args.problem == "coding":
        if args.epsilon is None:
            raise UsageError("coding needs --epsilon")
        return args.epsilon
    if args.delta is None:
        raise UsageError(f"{args.problem} needs --delta")
    return args.delta


# -- subcommands -----------------------------------------------------------------


def cmd_rates(args):
    source = load_config(args.source).source
    budget = _budget(args)
    if args.a is None:
        sol = solve(source, args.problem, budget)
    else:
        solver = {"resolvability": resolvability_second_order,
                  "intrinsic": intrinsic_second_order,
                  "coding": coding_second_order}[args.problem]
        sol = solver(source, args.a, budget)
    if args.json:
        _emit(_dump({"problem": sol.problem, "budget": budget, "a_nats": sol.a,
                     "a_bits": sol.a / LN2, "b": sol.b, "case": sol.case_label,
                     "active": list(sol.active)}), args.out)
        return
    rows = [
        ("problem", sol.problem),
        ("budget", repr(budget)),
        ("a_nats", repr(sol.a)),
        ("a_bits", repr(sol.a / LN2)),
        ("b_nats", str(sol.b) if not sol.finite else repr(sol.b)),
        ("case", sol.case_label),
        ("active", ",".join(str(i) for i in sol.active) or "-"),
    ]
    width = max(len(k) for k, _ in rows)
    _emit("".join(f"{k:<{width}}  {v}\n" for k, v in rows), args.out)


def cmd_spectrum(args):
    source = load_config(args.source).source
    if args.samples is None:
        spec = spectrum_from_classes(exact_classes(source, args.n))
    else:
        spec = mc_spectrum(source, args.n, args.samples, args.seed)
    if args.out is None:
        sys.stdout.write("value_nats,mass\n")
        for v, m in zip(spec.values, spec.masses):
            sys.stdout.write(f"{v:.17g},{m:.17g}\n")
    else:
        spec.write_csv(args.out)


def cmd_oracle(args):
    source = load_config(args.source).source
    classes = exact_classes(source, args.n)
    if (args.M is None) == (args.budget is None):
        raise UsageError("give exactly one of --M and --budget")
    doc = {"problem": args.problem, "n": args.n, "classes": len(classes)}
    if args.budget is not None:
        limit = 1.0 if args.problem == "coding" else 2.0
        if not 0.0 <= args.budget < limit:
            raise UsageError(f"--budget for {args.problem} must lie in [0, {limit:g})")
        doc["budget"] = args.budget
        if args.problem == "coding":
            M = min_code_size(classes, args.budget)
        elif args.problem == "resolvability":
            M = min_resolvability_size(classes, args.budget)
        else:
            M = max_ir_size(classes, args.budget, args.mode)
    else:
        M = args.M
    if args.problem == "coding":
        res = optimal_coding_error(classes, M)
        summary = [{"class": j, "kept": k} for j, k in res.allocation]
    elif args.problem == "resolvability":
        res = optimal_resolvability_distance(classes, M)
        summary = [{"class": j, "units_elements": [list(p) for p in pairs]}
                   for j, pairs in res.allocation]
    else:
        res = intrinsic_distance(classes, M, args.mode)
        if res.exactness == "exact":
            summary = [{"element": i, "bin": b} for i, b in enumerate(res.allocation)]
        else:
            summary = [{"load": load, "bins": count} for load, count in res.allocation]
        doc["note"] = ("heuristic objective is an upper bound on the optimal distance"
                       if res.exactness != "exact" else "exact optimum")
    doc.update({"M": res.M, "log_M": math.log(res.M), "objective": res.objective,
                "exactness": res.exactness})
    if not args.brief:
        doc["allocation"] = summary
    _emit(_dump(doc), args.out)


def _construct_doc(args, classes):
    n = args.n
    gamma = cons.default_gamma(n) if args.gamma is None else args.gamma
    doc = {"kind": args.kind, "n": n, "gamma": gamma}
    table = None
    if args.kind == "mapping":
        if args.M is None:
            raise UsageError("mapping needs --M")
        z = math.log(args.M) / math.sqrt(n) - gamma if args.z is None else args.z
        built = cons.build_lemma1_mapping(classes, args.M, z, gamma)
        oracle = optimal_resolvability_distance(classes, args.M, with_units=False).objective
        doc.update({"M": args.M, "z": z, "oracle": oracle})
        table = built.obj.units
    elif args.kind == "converse":
        if args.M is None or args.z is None:
            raise UsageError("converse needs --M and --z")
        bound = cons.lemma2_lower_bound(classes, args.M, args.z, gamma)
        oracle = optimal_resolvability_distance(classes, args.M, with_units=False).objective
        doc.update({"M": args.M, "z": args.z, "bound": bound, "oracle": oracle,
                    "margin": oracle - bound})
        return doc, None
    elif args.kind == "code":
        if args.M is None:
            raise UsageError("code needs --M")
        built = cons.build_lemma3_code(classes, args.M)
        doc.update({"M": args.M, "oracle": optimal_coding_error(classes, args.M).objective})
        table = tuple(((1, k),) if k else () for k in built.obj.kept)
    elif args.kind == "code-to-mapping":
        if args.M is None:
            raise UsageError("code-to-mapping needs --M")
        built = cons.code_to_mapping(cons.code_from_oracle(classes, args.M), classes, gamma)
        doc.update({"M": args.M, "mapping_M": built.obj.M})
        table = built.obj.units
    elif args.kind == "mapping-to-code":
        if args.M is None:
            raise UsageError("mapping-to-code needs --M")
        built = cons.mapping_to_code(cons.oracle_mapping(classes, args.M), classes)
        doc.update({"M": args.M, "code_kept": sum(built.obj.kept)})
        table = tuple(((1, k),) if k else () for k in built.obj.kept)
    else:
        z = 0.0 if args.z is None else args.z
        reports = cons.appendix_b_inequalities(load_config(args.source).source, n, z, gamma)
        doc.update({"z": z, "components": [
            {"component": r.component, "mixed": r.mixed, "lower": r.lower, "upper": r.upper,
             "lower_margin": r.lower_margin, "upper_margin": r.upper_margin, "holds": r.holds}
            for r in reports]})
        return doc, None
    doc.update({"achieved": built.achieved, "bound": built.bound, "margin": built.margin})
    return doc, table


def cmd_construct(args):
    source = load_config(args.source).source
    classes = exact_classes(source, args.n)
    doc, table = _construct_doc(args, classes)
    if args.table is not None:
        if table is None:
            raise UsageError(f"{args.kind} has no allocation table")
        lines = ["class,value_nats,units_per_element,elements\n"]
        for j, pairs in enumerate(table):
            for u, c in pairs:
                lines.append(f"{j},{classes.values[j]:.17g},{u},{c}\n")
        _emit("".join(lines), args.table)
    _emit(_dump(doc), args.out)


def cmd_study(args):
    source = load_config(args.source).source
    limit = 1.0 if args.problem == "coding" else 2.0
    if not 0.0 <= args.target < limit:
        raise UsageError(f"--target for {args.problem} must lie in [0, {limit:g})")
    rows = convergence_study(source, args.problem, args.target, args.grid, args.mode,
                             args.workers)
    comment = HEURISTIC_NOTE if args.problem == "intrinsic" and args.mode == "heuristic" else None
    if args.out is None:
        if comment:
            sys.stdout.write(comment + "\n")
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())
    else:
        emit_csv(rows, args.out, comment)


def _verify_settings(cfg):
    section = cfg.settings.get("verify", {})
    n_values = section.get("n", [4, 8, 12])
    if not isinstance(n_values, list) or not all(isinstance(v, int) and v >= 1 for v in n_values):
        raise ConfigError("verify.n must be a list of positive integers")

    def number(key, default):
        raw = section.get(key, default)
        return decimal(raw, f"verify.{key}") if isinstance(raw, str) else float(raw)

    return n_values, number("delta", 0.6), number("epsilon", 0.3)


def cmd_verify(args):
    if args.source is None:
        cfg = parse_config(resources.files("mixedrates").joinpath("data/default.toml").read_bytes())
    else:
        cfg = load_config(args.source)
    n_values, delta, epsilon = _verify_settings(cfg)
    if args.n is not None:
        n_values = args.n
    runs = [("config", cfg.source)]
    if args.random:
        rng = np.random.default_rng(args.seed)
        runs += [(f"random-{k}", random_mixture(rng)) for k in range(args.random)]
    report = []
    ok = True
    for label, source in runs:
        for check in run_checks(source, n_values, delta, epsilon):
            ok &= check.passed
            report.append({"source": label, **check.as_dict()})
    _emit(_dump({"passed": ok, "checks": report}), args.out)
    if not ok:
        failed = sum(not r["passed"] for r in report)
        print(f"verify: {failed} check(s) failed", file=sys.stderr)
        return 1
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixedrates",
        description="Second-order rates and exact finite-n oracles for mixed sources.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, source_required=True):
        p.add_argument("--source", required=source_required, metavar="TOML",
                       help="source configuration file")
        p.add_argument("--out", metavar="PATH", help="write data here instead of stdout")

    p = sub.add_parser("rates", help="first- and second-order rates")
    common(p)
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--delta", type=delta_arg)
    p.add_argument("--epsilon", type=epsilon_arg)
    p.add_argument("--a", type=finite_float, help="first-order rate in nats (default: admissible one)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("spectrum", help="exact or sampled self-information spectrum as CSV")
    common(p)
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--samples", type=positive_int, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("oracle", help="exact finite-n optimum")
    common(p)
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--M", type=positive_int)
    p.add_argument("--budget", type=finite_float, help="delta or epsilon; reports the optimal size")
    p.add_argument("--mode", choices=("heuristic", "exhaustive"), default="heuristic")
    p.add_argument("--brief", action="store_true", help="omit the allocation")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("construct", help="build a mapping or code and check its bound")
    common(p)
    p.add_argument("kind", choices=("mapping", "converse", "code", "code-to-mapping",
                                    "mapping-to-code", "spectrum-inequalities"))
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--M", type=positive_int)
    p.add_argument("--z", type=finite_float)
    p.add_argument("--gamma", type=positive_float, help="default n**-0.25")
    p.add_argument("--table", metavar="CSV", help="dump the class-wise allocation table")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("study", help="convergence study as CSV")
    common(p)
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--target", type=finite_float, required=True, help="delta or epsilon")
    p.add_argument("--grid", type=grid_arg, default=[64, 256, 1024, 4096])
    p.add_argument("--mode", choices=("heuristic", "exhaustive"), default="heuristic")
    p.add_argument("--workers", type=positive_int, help="default MIXEDRATES_THREADS or 1")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("verify", help="run the cross-module invariant checks")
    common(p, source_required=False)
    p.add_argument("--n", type=grid_arg, help="blocklengths (overrides the config)")
    p.add_argument("--random", type=int, default=0, metavar="K", help="also check K random mixtures")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"mixedrates {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except MixedRatesError as exc:
        print(f"mixedrates {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mixedrates {args.command}: {exc}", file=sys.stderr)
        return 1
    return code or 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
