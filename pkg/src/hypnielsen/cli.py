"""Command line entry point: ``hypnielsen <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import constants as K
from . import driver as D
from . import render as R


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(result: D.Dichotomy, args) -> int:
    _emit(result.dumps() + "\n", args.out)
    if getattr(args, "svg", None):
        R.render(result, args.svg)
    return result.exit_code


def cmd_reduce(args) -> int:
    spec = D.load_spec(args.spec)
    if args.timings:
        spec.config.timings = True
    return _run(D.reduce(spec), args)


def cmd_shorten(args) -> int:
    spec = D.load_spec(args.spec)
    return _run(D.epsilon_shorten(spec, args.eps), args)


def cmd_certify(args) -> int:
    spec = D.load_spec(args.spec)
    out = D.certify_only(spec)
    _emit(json.dumps(out, indent=2, sort_keys=True, default=D._json_default) + "\n", args.out)
    return 0 if out["certified"] else 3


def cmd_constants(args) -> int:
    base = K.BaseConstants()
    if args.base:
        with open(args.base) as fh:
            base = K.BaseConstants.from_json(json.load(fh))
    cs = args.c or [1]
    Ns = args.N or [base.N1]
    sched = K.build_schedule(args.n, cs, base, args.c0, Ns)
    _emit(json.dumps(sched.to_table(), indent=2) + "\n", args.out)
    return 0


def cmd_render(args) -> int:
    with open(args.report) as fh:
        result = D.result_from_report(json.load(fh))
    svg = R.render(result, depth=args.depth)
    _emit(svg, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypnielsen", description="Nielsen reduction and freeness certificates")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", help="run the dichotomy on a spec")
    r.add_argument("spec")
    r.add_argument("--out")
    r.add_argument("--svg")
    r.add_argument("--timings", action="store_true", help="record wall-clock timings (breaks byte determinism)")
    r.set_defaults(func=cmd_reduce)

    c = sub.add_parser("certify", help="certificate attempt on the tuple as given")
    c.add_argument("spec")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("shorten", help="dichotomy with short bound eps")
    s.add_argument("spec")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--out")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_shorten)

    k = sub.add_parser("constants", help="print the constant schedule")
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--base", help="JSON file with K, L, N0 and optionally N1")
    k.add_argument("--c", type=Fraction, action="append", help="constant c (repeatable)")
    k.add_argument("--N", type=Fraction, action="append", help="values of N for k(N, n)")
    k.add_argument("--c0", type=Fraction, default=Fraction(10))
    k.add_argument("--out")
    k.set_defaults(func=cmd_constants)

    v = sub.add_parser("render", help="SVG from a report")
    v.add_argument("report")
    v.add_argument("--out")
    v.add_argument("--depth", type=int)
    v.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (D.SpecError, K.ConstantsError, R.RenderError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
