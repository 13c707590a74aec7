"""Command-line front end.

Exit codes: 0 theorem / satisfiable / check passed, 1 non-theorem /
unsatisfiable / check failed, 2 unknown, 64 usage or parse error, 74 I/O
error.  Results go to stdout, traces and diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence, TextIO

from .chase import ChaseBudget, chase_explore
from .decision import (
    NON_THEOREM, SATISFIABLE, THEOREM, UNSATISFIABLE, DecisionBudget, decide, sat,
)
from .formula import FormulaSyntaxError, negate, parse_formula, to_text
from .instance import Instance
from .kripke import KripkeModel, QdpSet, check_qdp, force
from .template import TemplateSearchBudget, paper_branching, verify_template

EXIT_YES, EXIT_NO, EXIT_UNKNOWN, EXIT_USAGE, EXIT_IO = 0, 1, 2, 64, 74


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_text(arg: str) -> str:
    """``@path`` reads the file, anything else is taken literally."""
    if arg.startswith("@"):
        with open(arg[1:], encoding="utf-8") as fh:
            return fh.read().strip()
    return arg


def _formula(arg: str):
    text = _read_text(arg)
    try:
        return parse_formula(text)
    except FormulaSyntaxError as exc:
        pointer = " " * exc.position + "^"
        raise UsageError(f"formula: {exc}\n  {text}\n  {pointer}") from None


def _qdps(text: str) -> QdpSet:
    try:
        return QdpSet.parse(_read_text(text))
    except ValueError as exc:
        raise UsageError(f"qdp: {exc}") from None


def _load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="quasik", description="Decide modal formulas over quasi-dense frames.")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    ap.add_argument("--jobs", type=_positive, default=_env_jobs(),
                    help="worker cap (default $QUASIK_JOBS or 1)")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(p, formula=True):
        if formula:
            p.add_argument("-f", "--formula", required=True, help="formula text or @file")
        p.add_argument("-p", "--qdps", default="", help='QDP list such as "1->2,2->3"')
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)

    def budgets(p):
        p.add_argument("--max-steps", type=_positive, default=5000)
        p.add_argument("--max-branches", type=_positive, default=512)
        p.add_argument("--max-total-steps", type=_positive, default=50_000)
        p.add_argument("--trace", metavar="PATH", help="write chase steps to PATH ('-' for stderr)")

    for name in ("decide", "sat"):
        p = sub.add_parser(name)
        common(p)
        budgets(p)
        p.add_argument("--oracle-worlds", type=_positive, default=4)
        p.add_argument("--branching", type=_positive, default=None,
                       help="template branching cap (default: the authoritative bound)")
        p.add_argument("--max-candidates", type=_positive, default=20_000)
        p.add_argument("--timings", action="store_true", help="include wall-clock times")

    p = sub.add_parser("chase")
    common(p)
    budgets(p)
    p.add_argument("--all-branches", action="store_true", help="do not stop at the first witness")

    p = sub.add_parser("check-template")
    common(p)
    p.add_argument("-t", "--template", required=True, help="instance JSON file")

    p = sub.add_parser("model-check")
    common(p)
    p.add_argument("-m", "--model", required=True, help="Kripke model JSON file")
    p.add_argument("-w", "--world", required=True)
    return ap


def _env_jobs() -> int:
    try:
        return max(1, int(os.environ.get("QUASIK_JOBS", "1")))
    except ValueError:
        return 1


def _emit(out: TextIO, as_json: bool, data: dict, human: str) -> None:
    if as_json:
        out.write(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        out.write(human + "\n")


class _Tracer:
    def __init__(self, path: Optional[str], err: TextIO):
        self.fh = None
        if path == "-":
            self.fh = err
        elif path:
            self.fh = open(path, "w", encoding="utf-8")
        self.own = self.fh is not None and self.fh is not err

    def __call__(self, entry) -> None:
        self.fh.write(str(entry) + "\n")

    @property
    def hook(self):
        return self if self.fh is not None else None

    def close(self) -> None:
        if self.own:
            self.fh.close()


def _chase_budget(a) -> ChaseBudget:
    return ChaseBudget(a.max_steps, a.max_branches, a.max_total_steps)


def _cmd_decide(a, out, err) -> int:
    f = _formula(a.formula)
    p = _qdps(a.qdps)
    tb = TemplateSearchBudget(max_branching=a.branching, max_candidates=a.max_candidates,
                              space_ceiling=1e12)
    budget = DecisionBudget(a.oracle_worlds, _chase_budget(a), tb)
    if a.branching is not None and a.branching < paper_branching(f if a.cmd == "sat" else negate(f)):
        err.write("warning: branching cap below the authoritative bound; "
                  "template exhaustion will not be treated as a verdict\n")
    tracer = _Tracer(a.trace, err)
    try:
        fn = decide if a.cmd == "decide" else sat
        res = fn(f, p, budget, on_step=tracer.hook)
    finally:
        tracer.close()
    data = res.to_json()
    data["input"] = to_text(f)
    if not a.timings:
        data["resources"] = {k: v for k, v in data["resources"].items() if not k.endswith("_seconds")}
    human = f"{res.verdict} (stage: {res.stage}, certificate: {res.certificate.kind})"
    _emit(out, a.json, data, human)
    if res.verdict in (THEOREM, SATISFIABLE):
        return EXIT_YES
    if res.verdict in (NON_THEOREM, UNSATISFIABLE):
        return EXIT_NO
    return EXIT_UNKNOWN


def _cmd_chase(a, out, err) -> int:
    f = _formula(a.formula)
    p = _qdps(a.qdps)
    tracer = _Tracer(a.trace, err)
    try:
        res = chase_explore(f, p, _chase_budget(a), stop_at_witness=not a.all_branches,
                            on_step=tracer.hook)
    finally:
        tracer.close()
    human = (f"{res.verdict}: {len(res.branches)} branches, {res.total_steps} steps"
             + ("" if res.witness is None else f", witness branch {res.branches[res.witness].id}"))
    _emit(out, a.json, res.to_json(), human)
    return {"all_contradictory": EXIT_NO, "witness": EXIT_YES}.get(res.verdict, EXIT_UNKNOWN)


def _cmd_check_template(a, out, err) -> int:
    f = _formula(a.formula)
    p = _qdps(a.qdps)
    try:
        tree = Instance.from_json(_load_json(a.template))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"template: malformed instance JSON ({exc})") from None
    got = verify_template(tree, f, p)
    if hasattr(got, "property"):
        _emit(out, a.json, {"ok": False, "violation": got.to_json()},
              f"violation of property {got.property}: {got.detail}")
        return EXIT_NO
    _emit(out, a.json, {"ok": True, "template": got.to_json()}, "ok")
    return EXIT_YES


def _cmd_model_check(a, out, err) -> int:
    f = _formula(a.formula)
    p = _qdps(a.qdps)
    try:
        m = KripkeModel.from_json(_load_json(a.model))
        w = m.world_index(a.world)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"model: {exc}") from None
    forced = force(m, w, f)
    frame = {str(q): check_qdp(m, q) for q in p}
    ok = forced and all(frame.values())
    data = {"forced": forced, "qdps": frame, "world": m.worlds[w], "ok": ok}
    human = f"forced: {str(forced).lower()}" + "".join(
        f"\n{q}: {str(v).lower()}" for q, v in frame.items())
    _emit(out, a.json, data, human)
    return EXIT_YES if ok else EXIT_NO


_COMMANDS = {
    "decide": _cmd_decide, "sat": _cmd_decide, "chase": _cmd_chase,
    "check-template": _cmd_check_template, "model-check": _cmd_model_check,
}


def run(argv: Optional[Sequence[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        a = build_parser().parse_args(argv)
        return _COMMANDS[a.cmd](a, out, err)
    except UsageError as exc:
        err.write(f"quasik: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        err.write(f"quasik: {exc}\n")
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
