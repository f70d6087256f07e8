"""Command-line front end.

Exit codes: 0 success/pass, 1 verification failure, 2 inconclusive (node
limit hit), 3 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

from . import constructions as cons
from .analysis import DEFAULT_NODE_LIMIT, INCONCLUSIVE, verify_predicate
from .compilers import SemigroupPresentation, bundled_presentation, from_semigroup, to_2way
from .core import Protocol, ProtocolError, initial_configuration
from .interchange import FormatError, dumps, load
from .predicates import ParseError, input_domain, parse_predicate, parse_ranges
from .sim import DEFAULT_CHECK_BUDGET, DEFAULT_MAX_STEPS, DEFAULT_WINDOW, estimate

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3

FAMILIES = ("flock-standard", "flock-binary", "majority", "linear", "system", "semigroup")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _matrix(text: str) -> List[List[int]]:
    rows = [_ints(r) for r in text.split(";")]
    if not rows or any(not r for r in rows):
        raise UsageError(f"bad matrix {text!r}; use rows like '1,0;0,1'")
    return rows


def build_family(family: str, n: Optional[int] = None, a: Optional[str] = None,
                 c: Optional[str] = None, A: Optional[str] = None,
                 presentation: Optional[str] = None) -> Protocol:
    if family in ("flock-standard", "flock-binary", "majority"):
        if n is None:
            raise UsageError(f"{family} needs --n")
        if n < 1:
            raise UsageError("--n must be >= 1")
        fn = {"flock-standard": cons.flock_standard, "flock-binary": cons.flock_binary,
              "majority": cons.majority_leaders}[family]
        return fn(n)
    if family == "linear":
        if a is None:
            raise UsageError("linear needs --a")
        cs = _ints(c) if c is not None else [0]
        if len(cs) != 1:
            raise UsageError("linear takes a single --c")
        return cons.linear_inequality(_ints(a), cs[0])
    if family == "system":
        if A is None:
            raise UsageError("system needs --A")
        rows = _matrix(A)
        cs = _ints(c) if c is not None else [0] * len(rows)
        return cons.linear_system(cons.LinearSystemSpec(rows, cs))
    if family == "semigroup":
        sp = SemigroupPresentation.load(presentation) if presentation else bundled_presentation()
        return from_semigroup(sp)
    raise UsageError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


_SHORTHAND = re.compile(r"([a-z-]+)\(([^()]*)\)")


def load_protocol(ref: str) -> Protocol:
    """A protocol file path, or a shorthand such as ``flock-binary(3)``."""
    m = _SHORTHAND.fullmatch(ref.strip())
    if m and not Path(ref).exists():
        family, arg = m.group(1), m.group(2).strip()
        if family in ("flock-standard", "flock-binary", "majority"):
            return build_family(family, n=int(arg) if arg.lstrip("-").isdigit() else None)
        if family == "semigroup":
            return build_family(family, presentation=arg or None)
        raise UsageError(f"no shorthand for {family!r}; build a file first")
    return load(ref)


def variable_map(p: Protocol) -> Dict[str, str]:
    """Input variable name -> initial state."""
    mapping = dict(p.meta.get("variables") or {})
    for q in p.initial:
        mapping.setdefault(q, q)
    return mapping


def to_states(p: Protocol, inputs: Mapping[str, int]) -> Dict[str, int]:
    vm = variable_map(p)
    out: Dict[str, int] = {}
    for v, k in inputs.items():
        if v not in vm:
            raise UsageError(f"unknown input variable {v!r}; known: {', '.join(sorted(vm))}")
        out[vm[v]] = out.get(vm[v], 0) + int(k)
    return out


def _parse_input(text: str) -> Dict[str, int]:
    ranges = parse_ranges(text)
    if any(len(r) != 1 for r in ranges.values()):
        raise UsageError("--input takes single values, e.g. x=20,y=3")
    return {v: r[0] for v, r in ranges.items()}


def _write(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _certificate_lines(p: Protocol) -> List[str]:
    cert = p.meta.get("certificate", {})
    lines = [f"states: {len(p.states)}", f"leaders: {p.num_leaders}",
             f"max arity: {p.max_arity}"]
    for key in sorted(cert):
        if key.endswith("bound") or key.endswith("expected") or key == "lowered_states":
            lines.append(f"{key}: {cert[key]}")
    return lines


# -- commands ------------------------------------------------------------------


def cmd_build(args) -> int:
    p = build_family(args.family, n=args.n, a=args.a, c=args.c, A=args.A,
                     presentation=args.presentation)
    _write(dumps(p), args.out)
    print("\n".join(_certificate_lines(p)), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_compile(args) -> int:
    p = load_protocol(args.protocol)
    p2 = to_2way(p)
    _write(dumps(p2), args.out)
    low = p2.meta["lowering"]
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print(f"states before: {low['states_before']}", file=stream)
    print(f"states after: {low['states_after']}", file=stream)
    print(f"gadget states: {low['gadget_states']}", file=stream)
    print(f"gadget_bound: {low['gadget_bound']}", file=stream)
    return EXIT_OK


def cmd_check(args) -> int:
    p = load_protocol(args.protocol)
    text = args.predicate or p.meta.get("predicate")
    if not text:
        raise UsageError("--predicate is required for this protocol")
    pred = parse_predicate(text)
    ranges = parse_ranges(args.inputs)
    domain = input_domain(ranges, allow_empty=p.num_leaders > 0)
    vm = variable_map(p)
    for v in ranges:
        if v not in vm:
            raise UsageError(f"unknown input variable {v!r}; known: {', '.join(sorted(vm))}")
    missing = [v for v in pred.variables if v not in ranges]
    if missing:
        raise UsageError(f"predicate variables without a range: {', '.join(missing)}")
    back = {vm[v]: v for v in ranges}
    state_domain = [to_states(p, d) for d in domain]
    report = verify_predicate(
        p, lambda s: pred({back[q]: k for q, k in s.items()}), state_domain,
        node_limit=args.node_limit)
    for e in report.entries:
        e.inputs = {back[q]: k for q, k in e.inputs.items()}
    report.meta.update({"predicate": pred.text, "inputs": args.inputs,
                        "protocol": p.meta.get("construction", args.protocol)})
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if not args.report and not args.csv:
        sys.stdout.write(report.to_csv())
    print(f"verdict: {report.verdict} ({len(report.entries)} inputs)", file=sys.stderr)
    for e in report.failures:
        print(f"counterexample: {e.inputs} expected {e.expected} decided {e.decided}",
              file=sys.stderr)
    return {"pass": EXIT_OK, "fail": EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}[report.verdict]


def _sim_args(args):
    if args.window < 1 or args.max_steps < 1 or args.trials < 1:
        raise UsageError("--window, --max-steps and --trials must be >= 1")
    return dict(max_steps=args.max_steps, seed=args.seed, window=args.window,
                check_budget=args.check_budget, workers=args.workers)


def cmd_run(args) -> int:
    p = load_protocol(args.protocol)
    inputs = [_parse_input(t) for t in args.input]
    state_inputs = [to_states(p, d) for d in inputs]
    for s in state_inputs:
        initial_configuration(p, s)
    est = estimate(p, state_inputs, args.trials, **_sim_args(args))
    back: Dict[str, str] = {}
    for v, q in variable_map(p).items():
        back.setdefault(q, v)
    est.runs = [({back.get(q, q): k for q, k in inp.items()}, t, r) for inp, t, r in est.runs]
    _write(est.runs_csv(), args.csv)
    return EXIT_OK


def cmd_stats(args) -> int:
    p = load_protocol(args.protocol)
    ranges = parse_ranges(args.inputs)
    domain = input_domain(ranges, allow_empty=p.num_leaders > 0)
    est = estimate(p, [to_states(p, d) for d in domain], args.trials, **_sim_args(args))
    for s, d in zip(est.stats, domain):
        s.inputs = dict(d)
    _write(est.stats_csv(), args.csv)
    return EXIT_OK


def cmd_info(args) -> int:
    p = load_protocol(args.protocol)
    hist = p.arity_histogram()
    arity = "2-way only" if set(hist) <= {2} else f"up to {p.max_arity}-way"
    head = [f"{len(p.states)} states"]
    if p.num_leaders:
        head.append(f"{p.num_leaders} leaders")
    print(", ".join(head + [arity]))
    if p.num_leaders:
        print("leaders: " + json.dumps(dict(p.leaders), sort_keys=True))
    print(f"transitions: {len(p.transitions)} ("
          + ", ".join(f"{k}-way: {v}" for k, v in hist.items()) + ")")
    print(f"initial: {', '.join(sorted(p.initial))}")
    ones = [q for q in p.states if p.output[q] == 1]
    print(f"output 1: {', '.join(ones) if ones else '-'}")
    print(f"output 0: {len(p.states) - len(ones)} states")
    low = p.meta.get("lowering")
    if low:
        print(f"gadget states: {low['gadget_states']} "
              f"(lowered by arity: {json.dumps(low['lowered_by_arity'], sort_keys=True)})")
    meta = {k: v for k, v in p.meta.items() if k not in ("t1",)}
    print("meta: " + json.dumps(meta, sort_keys=True))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_sim_flags(sp, trials_default: int) -> None:
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    sp.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    sp.add_argument("--trials", type=int, default=trials_default)
    sp.add_argument("--check-budget", type=int, default=DEFAULT_CHECK_BUDGET)
    sp.add_argument("--workers", type=int, default=1,
                    help="processes for independent trials (results do not depend on it)")
    sp.add_argument("--csv", help="output CSV path (default stdout)")


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="popproto", description="Build, lower, verify and simulate "
                 "succinct population protocols.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="construct a protocol family and write it as JSON")
    b.add_argument("family", choices=FAMILIES)
    b.add_argument("--n", type=int, help="threshold for flock-* and majority")
    b.add_argument("--a", help="coefficients for linear, e.g. --a=1,-1")
    b.add_argument("--c", help="constant(s): linear takes one, system one per row")
    b.add_argument("--A", help="matrix for system, rows separated by ';', e.g. --A='1,0;0,1'")
    b.add_argument("--presentation", help="semigroup presentation JSON (default: bundled)")
    b.add_argument("-o", "--out", help="output path (default stdout)")
    b.set_defaults(func=cmd_build)

    c = sub.add_parser("compile", help="lower a k-way protocol to a 2-way protocol")
    c.add_argument("protocol")
    c.add_argument("-o", "--out", help="output path (default stdout)")
    c.set_defaults(func=cmd_compile)

    k = sub.add_parser("check", help="verify a predicate exactly on a finite input domain")
    k.add_argument("protocol", help="protocol file or shorthand like flock-binary(3)")
    k.add_argument("--predicate", help="e.g. 'x>=3' (default: the protocol's own)")
    k.add_argument("--inputs", required=True, help="e.g. x=1..6,y=0..3")
    k.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT)
    k.add_argument("--report", help="JSON report path")
    k.add_argument("--csv", help="CSV report path")
    k.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="simulate runs and write one CSV row per trial")
    r.add_argument("protocol")
    r.add_argument("--input", action="append", required=True,
                   help="input vector, e.g. x=20 (repeatable)")
    _add_sim_flags(r, trials_default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("stats", help="simulate a range of inputs and summarise per input")
    s.add_argument("protocol")
    s.add_argument("--inputs", required=True)
    _add_sim_flags(s, trials_default=20)
    s.set_defaults(func=cmd_stats)

    i = sub.add_parser("info", help="summarise a protocol")
    i.add_argument("protocol")
    i.set_defaults(func=cmd_info)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, FormatError, ProtocolError, ValueError, OSError) as exc:
        print(f"popproto: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
