"""``ntccrt`` command line: run, repl, bench and check.

Exit codes: 0 success, 1 static error (usage, file, parse, validation),
2 store inconsistency at run time.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from .dsl import ParseError, parse, parse_constraint, parse_constraint_list, validate
from .dsl import ast as A
from .dsl.validate import ValidationFailed, validate_constraint
from .engine import Engine, StarPolicy, StoreFailed
from .models import BUILTINS, builtin_source, sample_input, with_consts
from .trace import EventStream, Trace

EXIT_OK, EXIT_STATIC, EXIT_RUNTIME = 0, 1, 2
LATENCY_BUDGET_MS = 30.0


class StaticError(Exception):
    """Anything that prevents a run from starting; maps to exit code 1."""


# -- loading -----------------------------------------------------------------

def read_model_source(spec: str) -> tuple[str, str]:
    """Resolve ``spec`` as a file path, else as a builtin name."""
    path = Path(spec)
    if path.is_file():
        try:
            return str(path), path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StaticError(f"{spec}: {exc.strerror}") from None
    if spec in BUILTINS:
        return f"<builtin {spec}>", builtin_source(spec)
    raise StaticError(f"{spec}: no such file or builtin model")


def static_errors(label: str, source: str) -> tuple[A.ModelAst | None, list[dict]]:
    try:
        model = parse(source)
    except ParseError as exc:
        return None, [{"code": "ParseError", "message": f"expected {exc.expected}, found "
                       f"{exc.found}", "definition": None, "line": exc.line,
                       "column": exc.column, "file": label}]
    return model, [dict(e.to_dict(), file=label) for e in validate(model)]


def _fmt_error(e: dict) -> str:
    where = e["file"]
    if e.get("line") is not None:
        where += f":{e['line']}:{e['column']}"
    ctx = f" (in {e['definition']})" if e.get("definition") else ""
    return f"{where}: {e['code']}: {e['message']}{ctx}"


def load_model(spec: str, consts: dict | None = None) -> A.ModelAst:
    label, source = read_model_source(spec)
    model, errors = static_errors(label, source)
    if errors:
        raise StaticError("\n".join(_fmt_error(e) for e in errors))
    if consts:
        try:
            model = with_consts(model, consts)
        except KeyError as exc:
            raise StaticError(f"{label}: {exc.args[0]}") from None
    return model


def load_events(spec: str | None, model_spec: str, model: A.ModelAst) -> EventStream:
    if spec is None:
        return EventStream()
    if spec == "@sample":
        if model_spec not in BUILTINS:
            raise StaticError("@sample needs a builtin model")
        return sample_input(model_spec) or EventStream()
    try:
        events = EventStream.read(spec)
    except OSError as exc:
        raise StaticError(f"{spec}: {exc.strerror}") from None
    except ValueError as exc:
        raise StaticError(f"{spec}: {exc}") from None
    for unit in sorted(events):
        for text in events[unit]:
            try:
                c = parse_constraint(text)
            except ParseError as exc:
                raise StaticError(f"{spec}: unit {unit}: {text!r}: {exc}") from None
            errs = validate_constraint(model, c)
            if errs:
                raise StaticError(f"{spec}: unit {unit}: {text!r}: {errs[0].code}: "
                                  f"{errs[0].message}")
    return events


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("NTCCRT_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise StaticError(f"NTCCRT_SEED must be an integer, got {env!r}") from None


def _policy(text: str | None) -> StarPolicy | None:
    if text is None:
        return None
    try:
        return StarPolicy.parse(text)
    except ValueError as exc:
        raise StaticError(str(exc)) from None


def _consts(items) -> dict:
    out = {}
    for item in items or ():
        name, eq, value = item.partition("=")
        try:
            if not eq:
                raise ValueError
            out[name.strip()] = int(value)
        except ValueError:
            raise StaticError(f"-D expects NAME=INT, got {item!r}") from None
    return out


# -- bench -------------------------------------------------------------------

def _nearest_rank(sorted_xs: list, pct: float) -> float:
    return sorted_xs[max(0, math.ceil(pct / 100 * len(sorted_xs)) - 1)]


@dataclass
class BenchStats:
    latencies_ms: list = field(default_factory=list)
    processes: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.latencies_ms) if self.latencies_ms else 0.0

    @property
    def p50(self) -> float:
        return _nearest_rank(sorted(self.latencies_ms), 50) if self.latencies_ms else 0.0

    @property
    def p95(self) -> float:
        return _nearest_rank(sorted(self.latencies_ms), 95) if self.latencies_ms else 0.0

    @property
    def max(self) -> float:
        return max(self.latencies_ms, default=0.0)

    @property
    def mean_processes(self) -> float:
        return statistics.fmean(self.processes) if self.processes else 0.0

    def summary(self) -> str:
        return (f"units {len(self.latencies_ms)}  mean {self.mean:.3f} ms  "
                f"p50 {self.p50:.3f} ms  p95 {self.p95:.3f} ms  max {self.max:.3f} ms  "
                f"processes/unit {self.mean_processes:.1f} (max {max(self.processes, default=0)})")


def execute(model: A.ModelAst, events, units: int, seed: int, policy=None,
            continue_on_fail: bool = False, timed: bool = False):
    """Run ``units`` units; returns (trace, stats, failure or None)."""
    eng = Engine(model, seed, policy, continue_on_fail)
    trace, stats = Trace(), BenchStats()
    clock = time.perf_counter
    for u in range(1, units + 1):
        tells = events.get(u, ()) if events is not None else ()
        t0 = clock()
        try:
            rec = eng.run_time_unit(tells)
        except StoreFailed as exc:
            trace.records.append(exc.record)
            return trace, stats, exc
        if timed:
            stats.latencies_ms.append((clock() - t0) * 1000.0)
            stats.processes.append(rec.processes)
        trace.records.append(rec)
    return trace, stats, None


# -- commands ----------------------------------------------------------------

def _emit_trace(trace: Trace, path: str | None, out: TextIO) -> None:
    if path is None:
        out.write(trace.dumps())
    else:
        trace.write(path)


def cmd_run(args, out: TextIO, err: TextIO) -> int:
    model = load_model(args.model, _consts(args.define))
    events = load_events(args.input, args.model, model)
    trace, _, failure = execute(model, events, args.units, resolve_seed(args.seed),
                                _policy(args.star_policy), args.continue_on_fail)
    _emit_trace(trace, args.trace, out)
    if failure is not None:
        err.write(f"error: StoreFailed: store became inconsistent in time-unit "
                  f"{failure.unit}\n")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_bench(args, out: TextIO, err: TextIO) -> int:
    model = load_model(args.model, _consts(args.define))
    events = load_events(args.input, args.model, model)
    trace, stats, failure = execute(model, events, args.units, resolve_seed(args.seed),
                                    _policy(args.star_policy), timed=True)
    if args.trace:
        trace.write(args.trace)
    if failure is not None:
        err.write(f"error: StoreFailed: store became inconsistent in time-unit "
                  f"{failure.unit}\n")
        return EXIT_RUNTIME
    if args.json:
        out.write(json.dumps({"units": len(stats.latencies_ms), "mean_ms": stats.mean,
                              "p50_ms": stats.p50, "p95_ms": stats.p95, "max_ms": stats.max,
                              "processes_mean": stats.mean_processes,
                              "processes": stats.processes,
                              "budget_ms": LATENCY_BUDGET_MS}, sort_keys=True) + "\n")
    else:
        out.write(stats.summary() + "\n")
        verdict = "within" if stats.mean < LATENCY_BUDGET_MS else "over"
        out.write(f"mean {verdict} the {LATENCY_BUDGET_MS:g} ms budget\n")
    return EXIT_OK if stats.mean < LATENCY_BUDGET_MS else EXIT_STATIC


def cmd_check(args, out: TextIO, err: TextIO) -> int:
    try:
        label, source = read_model_source(args.model)
    except StaticError as exc:
        errors = [{"code": "FileError", "message": str(exc), "definition": None,
                   "line": None, "column": None, "file": args.model}]
    else:
        _, errors = static_errors(label, source)
    if args.json:
        out.write(json.dumps({"file": args.model, "ok": not errors, "errors": errors},
                             sort_keys=True) + "\n")
    elif errors:
        for e in errors:
            err.write((e["message"] if e["code"] == "FileError" else _fmt_error(e)) + "\n")
    else:
        out.write(f"{label}: ok\n")
    return EXIT_STATIC if errors else EXIT_OK


def repl(engine: Engine, inp: TextIO, out: TextIO) -> int:
    """Line-per-unit session; returns the number of units executed."""
    while True:
        out.write(f"[{engine.unit + 1}]> ")
        out.flush()
        line = inp.readline()
        if not line:
            out.write("\n")
            return engine.unit
        text = line.strip()
        if text in (":q", ":quit", "quit", "exit"):
            return engine.unit
        try:
            tells = parse_constraint_list(text)
        except ParseError as exc:
            out.write(f"parse error: {exc}\n")
            continue
        bad = [e for c in tells for e in validate_constraint(engine.model, c)]
        if bad:
            out.write(f"error: {bad[0].code}: {bad[0].message}\n")
            continue
        rec = engine.run_time_unit(tells)
        if rec.status == "failed":
            out.write(f"unit {rec.unit}: store inconsistent, nothing emitted\n")
            continue
        shown = ", ".join(f"{k}={v}" for k, v in rec.outputs.items()) or "(nothing determined)"
        out.write(f"unit {rec.unit}: {shown}\n")


def cmd_repl(args, out: TextIO, err: TextIO, inp: TextIO | None = None) -> int:
    model = load_model(args.model, _consts(args.define))
    eng = Engine(model, resolve_seed(args.seed), _policy(args.star_policy),
                 continue_on_fail=True)
    out.write("one line per time-unit: comma-separated constraints, blank for none; "
              ":quit to leave\n")
    repl(eng, inp if inp is not None else sys.stdin, out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_STATIC, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ntccrt", description="Run ntcc models over discrete time-units.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, units=True, inputs=True):
        p.add_argument("model", help="path to a .ntcc file or a builtin: " + ", ".join(BUILTINS))
        p.add_argument("--seed", type=int, help="RNG seed (default: $NTCCRT_SEED or 0)")
        p.add_argument("--star-policy", metavar="P",
                       help="fixed:K, geometric:P or schedule:A,B,... (default geometric:0.5)")
        p.add_argument("-D", dest="define", action="append", metavar="NAME=INT",
                       help="override a model constant")
        if units:
            p.add_argument("--units", type=int, default=10, help="time-units to run (default 10)")
        if inputs:
            p.add_argument("--input", metavar="FILE",
                           help="JSON Lines event stream; '@sample' for a builtin's own")

    p = sub.add_parser("run", help="execute a model and write its trace")
    common(p)
    p.add_argument("--trace", metavar="FILE", help="trace destination (default stdout)")
    p.add_argument("--continue-on-fail", action="store_true",
                   help="record an inconsistent unit and keep going")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("repl", help="interactive session, one line per time-unit")
    common(p, units=False, inputs=False)
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("bench", help="per-unit latency statistics")
    common(p)
    p.add_argument("--trace", metavar="FILE", help="also write the trace here")
    p.add_argument("--json", action="store_true", help="machine-readable statistics")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="parse and validate only")
    p.add_argument("model")
    p.add_argument("--json", action="store_true", help="machine-readable diagnostics")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_STATIC
    if getattr(args, "units", 1) < 0:
        err.write("error: --units must be non-negative\n")
        return EXIT_STATIC
    try:
        return args.func(args, out, err)
    except (StaticError, ValidationFailed) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_STATIC


if __name__ == "__main__":
    sys.exit(main())
