"""Command line front end.

    wildstokes analyze CLASS.json [--dot FILE]
    wildstokes validate FILE... [--jobs N]
    wildstokes split FILTERED.json
    wildstokes random --kind KIND [--seed S] [--rank R] [--levels L] [--ram M] [--genus G] [--class weber|FILE]
    wildstokes wilson REP.json --cycle '[[0,0],[1,0]]' --loop "S1"

Exit codes: 0 ok, 1 validation failure, 2 parse failure, 3 semantic failure.
Every command writes JSON to --out (default stdout).
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import dot
from .exact import rat_str
from .fixtures import random_class, random_graded, weber_class
from .irregular import Fiber, IrregularClass, NotRepresentableError, OscillatoryError, fission_tree
from .structures import (
    StokesFilteredLS,
    StokesGradedLS,
    StokesLocalSystem,
    canonical_splitting,
    grading_to_filtration,
    graded_to_stokes_ls,
    label_to_json,
    validate,
)
from .wild_reps import (
    StokesRepresentation,
    UnknownGenerator,
    cycle_from_json,
    rep_from_sgls,
    validate_rep,
    wilson_loop,
)

OK, INVALID, PARSE, SEMANTIC = 0, 1, 2, 3
STRUCTURES = {"filtered": StokesFilteredLS, "graded": StokesGradedLS, "stokes-ls": StokesLocalSystem,
              "rep": StokesRepresentation}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _read_json(path):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise CliError(PARSE, f"cannot read {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise CliError(PARSE, f"{path}: not JSON ({e.msg} at line {e.lineno})")


def _parse(fn, what, data):
    try:
        return fn(data)
    except (KeyError, TypeError, IndexError, AttributeError, ValueError, ZeroDivisionError) as e:
        if isinstance(e, (NotRepresentableError, OscillatoryError)):
            raise CliError(SEMANTIC, f"{what}: {e}")
        raise CliError(PARSE, f"malformed {what}: {e!r}")


def load_class(path) -> IrregularClass:
    data = _read_json(path)
    if isinstance(data, dict):
        if data.get("kind") not in (None, "class"):
            raise CliError(SEMANTIC, f"expected a class, got kind {data.get('kind')!r}")
        data = data.get("class")
    return _parse(IrregularClass.from_json, "class", data)


def load_structure(path, allowed=None):
    data = _read_json(path)
    if not isinstance(data, dict) or "kind" not in data:
        raise CliError(PARSE, f"{path}: missing kind tag")
    kind = data["kind"]
    if kind not in STRUCTURES or (allowed and kind not in allowed):
        want = ", ".join(allowed or STRUCTURES)
        raise CliError(SEMANTIC, f"{path}: kind {kind!r} is not one of {want}")
    if data.get("version", 1) != 1:
        raise CliError(SEMANTIC, f"{path}: unsupported version {data.get('version')!r}")
    return kind, _parse(STRUCTURES[kind].from_json, kind, data)


def _emit(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _pi(t: Fraction) -> dict:
    return {"pi_multiple": rat_str(t)}


# ---------------------------------------------------------------- commands

def analyze_class(theta: IrregularClass) -> dict:
    fib = Fiber.of_class(theta)
    sing = fib.singular_directions()
    tree = fission_tree(theta)
    quivers = []
    for t in sing:
        arrows = sorted(fib.arrows_at(t))
        quivers.append({
            "direction": _pi(t),
            "arrows": [{"from": label_to_json(i), "to": label_to_json(j), "level": rat_str(k)}
                       for i, j, k in arrows],
            "stokes_group_dim": sum(fib.mults[i] * fib.mults[j] for i, j, _ in arrows),
        })
    return {
        "kind": "analysis",
        "class": theta.to_json(),
        "rank": theta.rank,
        "fiber": [label_to_json(p) for p in fib.labels],
        "stokes_directions": [_pi(t) for t in fib.stokes_directions()],
        "singular_directions": [_pi(t) for t in sing],
        "levels": [rat_str(k) for k in fib.levels()],
        "arrow_count": sum(len(q["arrows"]) for q in quivers),
        "fission_tree": {
            "levels": [rat_str(k) for k in tree.levels],
            "degrees": tree.degrees,
            "stages": [s.to_json() for s in tree.stages],
            "maps": [[[label_to_json(p), label_to_json(m[p])] for p in sorted(m)] for m in tree.maps],
        },
        "quivers": quivers,
    }


def cmd_analyze(args) -> int:
    theta = load_class(args.input)
    try:
        report = analyze_class(theta)
    except (ValueError, OscillatoryError) as e:
        raise CliError(SEMANTIC, str(e))
    _emit(report, args.out)
    if args.dot:
        fib = Fiber.of_class(theta)
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(dot.class_dot(theta, fission_tree(theta), fib.singular_directions()))
    return OK


def _validate_one(path):
    try:
        kind, obj = load_structure(path)
        if kind == "rep":
            w, rep = obj
            report = validate_rep(w, rep)
        else:
            report = validate(obj)
    except CliError as e:
        return e.code, {"file": path, "error": str(e)}
    out = report.to_json()
    out["file"] = path
    return (OK if report.ok else INVALID), out


def cmd_validate(args) -> int:
    if args.jobs > 1 and len(args.inputs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_validate_one, args.inputs))
    else:
        results = [_validate_one(p) for p in args.inputs]
    reports = [r for _, r in results]
    _emit(reports[0] if len(reports) == 1 else reports, args.out)
    return max(code for code, _ in results)


def cmd_split(args) -> int:
    _, s = load_structure(args.input, allowed=("filtered",))
    report = validate(s)
    if not report.ok:
        _emit(report.to_json(), args.out)
        return INVALID
    _emit(canonical_splitting(s, check=False).to_json(), args.out)
    return OK


def _fixture_class(args, rnd):
    if args.class_ == "weber":
        return weber_class()
    if args.class_:
        return load_class(args.class_)
    return random_class(rnd, rank_max=args.rank, levels_max=args.levels, ram_max=args.ram)


def cmd_random(args) -> int:
    rnd = random.Random(args.seed)
    theta = _fixture_class(args, rnd)
    if args.kind == "class":
        _emit({"kind": "class", "class": theta.to_json()}, args.out)
        return OK
    try:
        s = random_graded(rnd, theta=theta, genus=args.genus)
    except ValueError as e:
        raise CliError(SEMANTIC, str(e))
    if args.kind == "graded":
        obj = s.to_json()
    elif args.kind == "filtered":
        obj = grading_to_filtration(s, check=False).to_json()
    elif args.kind == "stokes-ls":
        obj = graded_to_stokes_ls(s, check=False).to_json()
    else:
        w, rep = rep_from_sgls(s)
        obj = rep.to_json(w)
    _emit(obj, args.out)
    return OK


def cmd_wilson(args) -> int:
    _, (w, rep) = load_structure(args.input, allowed=("rep",))
    report = validate_rep(w, rep)
    if not report.ok:
        _emit(report.to_json(), args.out)
        return INVALID
    try:
        cycle = cycle_from_json(json.loads(args.cycle))
    except (json.JSONDecodeError, TypeError, ValueError, IndexError) as e:
        raise CliError(PARSE, f"malformed cycle: {e}")
    bad = [c for c in cycle if c not in w.dims]
    if bad or not cycle:
        raise CliError(SEMANTIC, f"cycle nodes not in the fibre: {bad or 'empty cycle'}")
    try:
        value = wilson_loop(w, rep, cycle, args.loop)
    except UnknownGenerator as e:
        raise CliError(SEMANTIC, f"unknown generator {e.args[0]!r}")
    _emit({"kind": "wilson", "cycle": json.loads(args.cycle), "loop": args.loop,
           "value": value.to_json(), "text": str(value)}, args.out)
    return OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wildstokes", description="Exact Stokes data of irregular classes.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output path (default stdout)")
        return sp

    a = common(sub.add_parser("analyze", help="Stokes data of an irregular class"))
    a.add_argument("input")
    a.add_argument("--dot", help="write the fission tree and quivers as DOT")
    a.set_defaults(func=cmd_analyze)

    v = common(sub.add_parser("validate", help="validate structures by their kind tag"))
    v.add_argument("inputs", nargs="+")
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_validate)

    s = common(sub.add_parser("split", help="canonical Stokes grading of a filtered structure"))
    s.add_argument("input")
    s.set_defaults(func=cmd_split)

    r = common(sub.add_parser("random", help="deterministic valid fixture"))
    r.add_argument("--kind", choices=["class", "graded", "filtered", "stokes-ls", "rep"], default="graded")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--rank", type=int, default=4)
    r.add_argument("--levels", type=int, default=2)
    r.add_argument("--ram", type=int, default=2)
    r.add_argument("--genus", type=int, choices=[0, 1], default=1)
    r.add_argument("--class", dest="class_", help="'weber' or a class file (default: random)")
    r.set_defaults(func=cmd_random)

    w = common(sub.add_parser("wilson", help="wild Wilson loop of a representation"))
    w.add_argument("input")
    w.add_argument("--cycle", required=True, help="JSON list of [circle, sheet] nodes")
    w.add_argument("--loop", required=True, help="word in the generators, ' for inverse")
    w.set_defaults(func=cmd_wilson)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"wildstokes: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
