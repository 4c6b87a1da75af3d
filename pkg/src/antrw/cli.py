"""Command-line front end: ``antrw <subcommand> [flags]``.

Exit status is 0 on success, 1 on a usage error (bad flag, bad value, bad
config) and 2 when a run fails after its inputs were accepted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

from . import graph as graphs
from .circuits import (TrapObserver, enumerate_circuits, min_certified_gap,
                       residual_escape_bound, trap_probability_lower_bound,
                       turn_probability_lower_bound)
from .montecarlo import KINDS, ExperimentSpec, dumps, run_experiment
from .walker import RngStream, WalkerState, run, write_trace


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _radii(text):
    try:
        return [int(r) for r in text.split(",") if r.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"radii must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="antrw", description="Directed-edge-reinforced random walk simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, steps_default):
        sp.add_argument("--beta", type=float, default=1.0, help="reinforcement strength")
        sp.add_argument("--steps", type=_nonneg_int, default=steps_default, help="step budget")
        sp.add_argument("--seed", type=_nonneg_int, default=0)
        sp.add_argument("--config", help="JSON file whose keys mirror the flags")

    s = sub.add_parser("simulate", help="one trial; prints the trial record")
    s.add_argument("--graph", help="graph spec such as cycle:3, or an edge-list path")
    common(s, 100_000)
    s.add_argument("--epsilon", type=float, default=1e-6, help="trap certification level")
    s.add_argument("--trace", help="write a JSONL step trace to this file")

    e = sub.add_parser("experiment", help="a seeded batch of trials; prints summary JSON")
    e.add_argument("--kind", choices=KINDS)
    e.add_argument("--graph", default="cycle:3")
    common(e, 100_000)
    e.add_argument("--trials", type=_positive_int, default=100)
    e.add_argument("--epsilon", type=float, default=1e-6)
    e.add_argument("--radii", type=_radii, default=[])
    e.add_argument("--turns", type=_positive_int, default=3)
    e.add_argument("--max-renewals", type=_positive_int, default=100)
    e.add_argument("--jobs", type=_positive_int, default=1)
    e.add_argument("--out", help="also write one CSV row per trial here")

    b = sub.add_parser("bounds", help="turn, trap and residual bound values")
    b.add_argument("--ell", type=int, help="circuit length")
    b.add_argument("--degree", type=int, help="maximum degree D")
    b.add_argument("--gap", type=int, help="circuit gap M")
    b.add_argument("--turns", type=_positive_int, default=1)
    b.add_argument("--beta", type=float, default=1.0)
    b.add_argument("--vertices", type=int, help="|V| for the trap bound (default: ell)")
    b.add_argument("--epsilon", type=float, default=1e-6)
    b.add_argument("--config")

    v = sub.add_parser("verify-1d", help="general engine against the closed form on a path")
    common(v, 500)
    v.add_argument("--length", type=_positive_int, default=50, help="half-length L of z_path")
    v.add_argument("--trials", type=_positive_int, default=100)

    g = sub.add_parser("graph-gen", help="write a generated graph as an edge list")
    g.add_argument("--spec")
    g.add_argument("--out", help="output file (default: standard output)")
    g.add_argument("--config")

    c = sub.add_parser("circuits", help="enumerate circuit classes")
    c.add_argument("--graph")
    c.add_argument("--max-len", type=int)
    c.add_argument("--cap", type=_positive_int, default=100_000)
    c.add_argument("--config")
    return p


# enforced after the config file is merged, so the file may supply them
REQUIRED = {"simulate": ("graph",), "experiment": ("kind",), "bounds": ("ell", "degree", "gap"),
            "graph-gen": ("spec",), "circuits": ("graph",)}


def _subparser(parser, name):
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return action.choices[name]


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(config, dict):
            raise UsageError("config must be a JSON object")
        sp = _subparser(parser, args.command)
        known = {a.dest for a in sp._actions} - {"help", "config"}
        config = {k.replace("-", "_"): val for k, val in config.items()}
        unknown = sorted(set(config) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        # flags given on the command line win over the file
        sp.set_defaults(**config)
        args = parser.parse_args(argv)
    missing = [f"--{k.replace('_', '-')}" for k in REQUIRED.get(args.command, ())
               if getattr(args, k) is None]
    if missing:
        raise UsageError(f"antrw {args.command}: missing required flags: {', '.join(missing)}")
    return args


def load_graph(spec: str) -> graphs.Graph:
    if ":" not in spec and os.path.exists(spec):
        return graphs.read_edge_list(spec)
    return graphs.generate(spec)


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj) + "\n")


def cmd_simulate(args):
    g = load_graph(args.graph)
    state = WalkerState.fresh(g, g.origin if g.coords is not None else 0, args.beta)
    field0 = state.field.copy()
    obs = TrapObserver(args.epsilon)
    rec = run(state, RngStream(args.seed), args.steps, [obs])
    if args.trace:
        with open(args.trace, "w") as fh:
            write_trace(fh, rec.trajectory, field0)
    out = rec.to_dict()
    out["graph"] = g.describe()
    out["field"] = state.field.to_json()
    _emit(out)


def _spec_from(args) -> ExperimentSpec:
    names = {f.name for f in fields(ExperimentSpec)}
    values = {k: v for k, v in vars(args).items() if k in names}
    values["max_steps"] = args.steps
    return ExperimentSpec(**values).validate()


def cmd_experiment(args):
    stats = run_experiment(args.spec)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(stats.to_csv())
    _emit(stats.to_dict())


def cmd_bounds(args):
    V = args.vertices if args.vertices is not None else args.ell
    _emit({
        "ell": args.ell, "degree": args.degree, "gap": args.gap, "turns": args.turns,
        "beta": args.beta, "vertices": V,
        "turn_bound": turn_probability_lower_bound(args.ell, args.degree, args.gap, args.turns, args.beta),
        "trap_bound": trap_probability_lower_bound(V, args.degree, args.beta),
        "residual_bound": residual_escape_bound(args.ell, args.degree, args.gap, args.beta),
        "certified_gap": min_certified_gap(args.ell, args.degree, args.epsilon, args.beta),
        "epsilon": args.epsilon,
    })


def cmd_verify_1d(args):
    stats = run_experiment(args.spec)
    agg = dict(stats.aggregates)
    agg["passed"] = agg["max_prob_diff"] <= 1e-12 and agg["field_ok_all"] and agg["kernel_match_all"]
    _emit({"beta": args.beta, "seed": args.seed, "trials": args.trials, "steps": args.steps, **agg})
    return 0 if agg["passed"] else 2


def cmd_graph_gen(args):
    g = graphs.generate(args.spec)
    text = graphs.format_edge_list(g)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_circuits(args):
    g = load_graph(args.graph)
    found = enumerate_circuits(g, args.max_len, cap=args.cap)
    _emit({"graph": g.describe(), "count": len(found), "circuits": [list(c.vertices) for c in found]})


COMMANDS = {
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "bounds": cmd_bounds,
    "verify-1d": cmd_verify_1d,
    "graph-gen": cmd_graph_gen,
    "circuits": cmd_circuits,
}


def _validate(args):
    """Checks that need no simulation; failures are usage errors."""
    eps = getattr(args, "epsilon", None)
    if eps is not None and not 0.0 < eps < 1.0:
        raise ValueError("--epsilon must lie in (0, 1)")
    if args.command == "simulate" and not args.beta >= 0:
        raise ValueError("--beta must be >= 0")
    if args.command == "experiment":
        args.spec = _spec_from(args)
    if args.command == "verify-1d":
        args.spec = ExperimentSpec("oned_equiv", graph=f"zpath:{args.length}", beta=args.beta,
                                   trials=args.trials, max_steps=args.steps, seed=args.seed).validate()
    if args.command == "bounds":
        if args.ell < 3 or args.degree < 2 or not args.beta > 0 or \
                (args.vertices is not None and args.vertices < 3):
            raise ValueError("bounds need ell >= 3, degree >= 2, vertices >= 3 and beta > 0")


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        _validate(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args) or 0
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
