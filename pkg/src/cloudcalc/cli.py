"""Command-line driver: ``cloudcalc run|explore|check-policy|simulate``.

stdout carries only the payload (trace lines, JSON, DOT, verdicts); anything
meant for humans goes to stderr.  Exit codes are part of the interface:

    run           0 terminated, 4 deadlocked-by-policy, 5 step budget hit
    check-policy  0 accept, 1 reject
    simulate      0 holds, 1 fails, 6 holds only up to the state cap
    explore       0, or 6 when the state cap truncated the graph
    any           2 parse/usage error, 3 unknown service, 7 other runtime error
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis
from .parser import (
    ParseError, load_policy, load_program, parse_history, parse_literal, tokenize,
)
from .policy import policy_accepts
from .runtime import (
    DEFAULT_DOMAIN, EvaluationError, StopReason, UnknownService, run,
)
from .syntax import UNIT, Resource, Str

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_UNKNOWN_SERVICE = 3
EXIT_DEADLOCK = 4
EXIT_BUDGET = 5
EXIT_TRUNCATED = 6
EXIT_RUNTIME = 7

_RUN_EXIT = {
    StopReason.TERMINATED: EXIT_OK,
    StopReason.DEADLOCKED: EXIT_DEADLOCK,
    StopReason.STEP_BUDGET: EXIT_BUDGET,
}


class UsageError(Exception):
    pass


def _positive(text):
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cloudcalc",
                                 description="Run and analyse cloud-server programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, program=True):
        if program:
            p.add_argument("--policy", action="append", default=[], metavar="PATH",
                           help="policy file overriding an import of the same name")
            p.add_argument("--invoke", action="append", default=[], metavar="NAME=LITERAL",
                           help="client request, FIFO; LITERAL _ draws from --domain")
        p.add_argument("--out", metavar="PATH", help="write the payload here instead of stdout")

    p = sub.add_parser("run", help="execute one run and print its trace")
    p.add_argument("program")
    common(p)
    p.add_argument("--seed", type=int, help="random scheduler seed (default: deterministic)")
    p.add_argument("--max-steps", type=_positive, default=1000)
    p.add_argument("--domain", help="values for open requests")
    p.add_argument("--format", choices=["text", "json"], default="text")

    p = sub.add_parser("explore", help="bounded state-space exploration")
    p.add_argument("program")
    common(p)
    p.add_argument("--depth", type=_positive, default=12)
    p.add_argument("--domain")
    p.add_argument("--max-states", type=_positive, default=analysis.DEFAULT_MAX_STATES)
    p.add_argument("--format", choices=["text", "json", "dot"], default="text")

    p = sub.add_parser("check-policy", help="check a history against a policy")
    p.add_argument("policy")
    p.add_argument("--history", required=True, help='e.g. "open(db),dbcmd,close(db)"')
    common(p, program=False)

    p = sub.add_parser("simulate", help="is LEFT weakly simulated by RIGHT?")
    p.add_argument("left")
    p.add_argument("right")
    common(p)
    p.add_argument("--depth", type=_positive, default=12)
    p.add_argument("--domain")
    p.add_argument("--max-states", type=_positive, default=analysis.DEFAULT_MAX_STATES)
    p.add_argument("--format", choices=["text", "json"], default="text")
    return ap


def parse_domain(text, resources=()) -> tuple:
    """Comma-separated literals; bare words that are not resources are strings."""
    values = []
    toks = [t for t in tokenize(text) if t.kind != "eof"]
    for i, t in enumerate(toks):
        if i % 2 == 1:
            if t.text != ",":
                raise ParseError("expected ','", t.line, t.col)
            continue
        if t.kind == "string":
            values.append(Str(t.text))
        elif t.kind == "ident":
            if t.text == "unit":
                values.append(UNIT)
            elif t.text in resources:
                values.append(Resource(t.text))
            else:
                values.append(Str(t.text))
        else:
            raise ParseError(f"expected a literal, found {t.text!r}", t.line, t.col)
    if toks and len(toks) % 2 == 0:
        raise ParseError("trailing ','", toks[-1].line, toks[-1].col)
    return tuple(values)


def _pending(specs, resources) -> tuple:
    out = []
    for spec in specs:
        name, sep, literal = spec.partition("=")
        if not sep or not name:
            raise UsageError(f"--invoke expects NAME=LITERAL, got {spec!r}")
        out.append((name, None if literal == "_" else parse_literal(literal, resources)))
    return tuple(out)


def _load(path, policy_paths):
    policies = {}
    for pp in policy_paths:
        a = load_policy(pp)
        policies[a.name] = a
    try:
        return load_program(path, policies)
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None


def _domain(args, resources):
    return DEFAULT_DOMAIN if args.domain is None else parse_domain(args.domain, resources)


def cmd_run(args):
    prog = _load(args.program, args.policy)
    pending = _pending(args.invoke, prog.resources)
    scheduler = "deterministic" if args.seed is None else args.seed
    result = run(prog.configuration(), pending, scheduler, args.max_steps,
                 _domain(args, prog.resources))
    n = len(result.trace)
    if args.format == "json":
        rows = [r.to_json() for r in result.log]
        rows += [{"step": n + 1, "thread": tid, "label": str(b),
                  "history_len": len(result.config.history)} for tid, b in result.blocked]
        payload = json.dumps(rows, indent=2, ensure_ascii=False) + "\n"
    else:
        lines = [str(lbl) for lbl in result.trace]
        if result.stop_reason is StopReason.DEADLOCKED:
            lines += [str(b) for _, b in result.blocked]
        payload = "".join(line + "\n" for line in lines)
    print(f"stop: {result.stop_reason} after {n} steps", file=sys.stderr)
    return _RUN_EXIT[result.stop_reason], payload


def cmd_explore(args):
    prog = _load(args.program, args.policy)
    pending = _pending(args.invoke, prog.resources)
    g = analysis.explore(prog.configuration(), pending, args.depth,
                         _domain(args, prog.resources), args.max_states)
    if args.format == "json":
        payload = analysis.graph_json(g) + "\n"
    elif args.format == "dot":
        payload = g.to_dot()
    else:
        lines = [f"nodes {len(g.configs)}", f"edges {len(g.edges)}",
                 f"truncated {str(g.truncated).lower()}"]
        lines += [f"{g.digest(e.src)} -- {e.label} --> {g.digest(e.dst)}" for e in g.edges]
        payload = "\n".join(lines) + "\n"
    return (EXIT_TRUNCATED if g.truncated else EXIT_OK), payload


def cmd_check_policy(args):
    a = load_policy(args.policy)
    verdict = policy_accepts(a, parse_history(args.history))
    return (EXIT_OK if verdict else EXIT_FAIL), f"{verdict}\n"


def cmd_simulate(args):
    left = _load(args.left, args.policy)
    right = _load(args.right, args.policy)
    resources = tuple(sorted(set(left.resources) | set(right.resources)))
    query = analysis.SimulationQuery(
        left.configuration(), right.configuration(), args.depth,
        _domain(args, resources), _pending(args.invoke, resources), args.max_states)
    result = analysis.bounded_weak_simulation(query)
    witness = [str(lbl) for lbl in result.witness or ()]
    if args.format == "json":
        payload = json.dumps({"verdict": result.verdict, "witness": witness,
                              "left_states": result.left_states,
                              "right_states": result.right_states}, indent=2) + "\n"
    else:
        payload = "".join(f"{line}\n" for line in [result.verdict] + witness)
    code = {analysis.HOLDS: EXIT_OK, analysis.FAILS: EXIT_FAIL,
            analysis.HOLDS_UP_TO_DEPTH: EXIT_TRUNCATED}[result.verdict]
    return code, payload


COMMANDS = {"run": cmd_run, "explore": cmd_explore, "check-policy": cmd_check_policy,
            "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, payload = COMMANDS[args.command](args)
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as err:
        print(f"error: cannot read {err.filename}: {err.strerror}", file=sys.stderr)
        return EXIT_PARSE
    except UnknownService as err:
        print(f"error at step {err.step}: {err}", file=sys.stderr)
        return EXIT_UNKNOWN_SERVICE
    except EvaluationError as err:
        print(f"runtime error at step {err.step}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return code


if __name__ == "__main__":
    sys.exit(main())
