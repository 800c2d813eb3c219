"""Command-line verifier: ``profinite-fa {algebra|tree|witness|fingerprint} -p P ...``.

Exit status: 0 when every check passes, 1 on a failed check, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from sympy import isprime

from . import congruence, localtree, quatalg
from .exactnum import DEFAULT_PRECISION, INF, verify_product_formula

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    p: int
    precision: int = DEFAULT_PRECISION
    radius: int = 2
    budget: int = localtree.DEFAULT_BUDGET
    levels: list = field(default_factory=lambda: [2, 3, 5])
    output: str = "table"
    seed: int = 0
    mode: str = "division"
    dot: str | None = None


def _emit(cfg: RunConfig, payload: dict, lines: list):
    if cfg.output == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print("\n".join(lines))


def _place(pl) -> str:
    return "inf" if pl == INF else str(pl)


def cmd_algebra(cfg: RunConfig) -> int:
    A = quatalg.choose_algebra(cfg.p)
    O = quatalg.maximal_order(A)
    report = verify_product_formula(A.a, A.b)
    ram = {_place(x) for x in report.ramified}
    ok = ram == {"inf", str(cfg.p)} and O.discriminant == cfg.p and O.is_closed()
    payload = {
        "p": cfg.p,
        "a": str(A.a),
        "b": str(A.b),
        "ramified": sorted(ram, key=lambda s: (s != "inf", s)),
        "symbols": {_place(k): v for k, v in report.symbols.items()},
        "order": O.to_json(),
        "discriminant": O.discriminant,
        "status": "PASS" if ok else "FAIL",
    }
    lines = [
        f"A = ({A.a}, {A.b} | Q)   p = {cfg.p}",
        "place  symbol",
        *[f"{_place(k):>5}  {v:+d}" for k, v in report.symbols.items()],
        f"Ram(A) = {{{', '.join(payload['ramified'])}}}",
        "maximal order basis: " + ", ".join(repr(e) for e in O.basis),
        f"reduced discriminant = {O.discriminant}",
        payload["status"],
    ]
    _emit(cfg, payload, lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_tree(cfg: RunConfig) -> int:
    if cfg.mode == "split":
        tree = localtree.LatticeTree.split(cfg.p, cfg.precision, cfg.budget)
    else:
        A = quatalg.choose_algebra(cfg.p)
        tree = localtree.LatticeTree.division(A, cfg.precision, cfg.budget)
    try:
        ball = tree.build_ball(tree.base_vertex(), cfg.radius)
    except localtree.BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except AssertionError as exc:
        print(f"tree invariant violated: {exc}", file=sys.stderr)
        return EXIT_FAIL
    residue = tree.ring.residue_size
    degree = ball.degree if cfg.radius > 0 else len(tree.neighbors(ball.center))
    payload = ball.to_json()
    payload.update(
        degree=degree,
        p_plus_one=cfg.p + 1,
        residue_ring_size=residue,
        one_plus_residue=1 + residue,
        degree_is_p_plus_one=degree == cfg.p + 1,
        vertices=len(ball.vertices),
        status="PASS",
    )
    if cfg.dot:
        with open(cfg.dot, "w") as fh:
            fh.write(ball.to_dot())
    lines = [
        f"mode={tree.mode} p={cfg.p} radius={cfg.radius}",
        f"vertices={len(ball.vertices)} edges={len(ball.edges)} spheres={ball.spheres}",
        f"degree={degree}   p+1={cfg.p + 1}   1+|residue ring|={1 + residue}"
        + ("" if degree == cfg.p + 1 else "   (degree differs from p+1)"),
        "acyclic and connected: yes",
        "PASS",
    ]
    _emit(cfg, payload, lines)
    return EXIT_OK


def cmd_witness(cfg: RunConfig) -> int:
    A = quatalg.choose_algebra(cfg.p)
    O = quatalg.maximal_order(A)
    try:
        rep = localtree.witness_hyperbolic(A, O, radius=cfg.radius, precision=cfg.precision)
    except localtree.WitnessNotHyperbolic as exc:
        print(f"witness failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    payload = rep.to_json()
    lines = [
        f"g = diag({rep.element.matrix.entries[0]!r}, {rep.element.matrix.entries[3]!r})   p = {cfg.p}",
        f"min displacement over the radius-{rep.ball_radius} ball ({rep.ball_size} vertices) = {rep.min_displacement}",
        f"translation length = {rep.translation_length}",
        " n  d(v0, g^n v0)  ratio",
        *[f"{n:2d}  {d:13d}  {d / n:5.2f}" for n, d in enumerate(rep.orbit_distances, start=1)],
        "PASS" if rep.passed else "FAIL",
    ]
    _emit(cfg, payload, lines)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_fingerprint(cfg: RunConfig) -> int:
    rows = []
    for l in cfg.levels:
        fd = congruence.fingerprint("Delta", cfg.p, l)
        fg = congruence.fingerprint("Gamma", cfg.p, l, seed=cfg.seed)
        rows.append((fd, fg, congruence.compare_fingerprints(fd, fg)))
    ok = all(r[2].passed for r in rows)
    payload = {
        "p": cfg.p,
        "rows": [
            {"comparison": c.to_json(), "Delta": fd.to_json(), "Gamma": fg.to_json()}
            for fd, fg, c in rows
        ],
        "status": "PASS" if ok else "FAIL",
    }
    lines = [f"{'p':>3} {'l':>3} {'|SL(4,F_l)|':>14} {'Delta':>14} {'Gamma':>14}  status"]
    for fd, fg, c in rows:
        lines.append(
            f"{cfg.p:>3} {c.level:>3} {c.target:>14} {fd.order:>14} {fg.order:>14}  {'PASS' if c.passed else 'FAIL'}"
        )
    _emit(cfg, payload, lines)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "algebra": cmd_algebra,
    "tree": cmd_tree,
    "witness": cmd_witness,
    "fingerprint": cmd_fingerprint,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profinite-fa", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-p", type=int, required=True, help="odd prime p")
    parser.add_argument("-r", "--radius", type=int, default=None)
    parser.add_argument("-l", "--levels", default="2,3,5", help="comma-separated prime levels")
    parser.add_argument("--mode", choices=("division", "split"), default="division")
    parser.add_argument("--json", action="store_true")
    parser.add_argument("--dot", default=None, help="write the tree ball as DOT to this path")
    parser.add_argument("--precision", type=int, default=int(os.environ.get("TOOL_PRECISION", DEFAULT_PRECISION)))
    parser.add_argument("--budget", type=int, default=int(os.environ.get("TOOL_BUDGET", localtree.DEFAULT_BUDGET)))
    parser.add_argument("--seed", type=int, default=0)
    return parser


def parse_config(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.p < 3 or not isprime(args.p):
        parser.error(f"-p must be an odd prime, got {args.p}")
    try:
        levels = [int(x) for x in args.levels.split(",") if x.strip()]
    except ValueError:
        parser.error(f"bad level list {args.levels!r}")
    if args.command == "fingerprint":
        for l in levels:
            if not isprime(l):
                parser.error(f"level {l} is not prime")
            if l == args.p:
                parser.error(f"level {l} must differ from p")
    radius = args.radius
    if radius is None:
        radius = 3 if args.command == "witness" else 2
    if radius < 0:
        parser.error("radius must be >= 0")
    if args.precision < 3:
        parser.error("precision must be >= 3")
    cfg = RunConfig(
        p=args.p,
        precision=args.precision,
        radius=radius,
        budget=args.budget,
        levels=levels,
        output="json" if args.json else "table",
        seed=args.seed,
        mode=args.mode,
        dot=args.dot,
    )
    return args.command, cfg


def main(argv=None) -> int:
    command, cfg = parse_config(argv)
    try:
        return COMMANDS[command](cfg)
    except (AssertionError, ArithmeticError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
