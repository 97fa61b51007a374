"""Command-line front end.

Every subcommand writes one table (CSV or JSON) to ``--out`` or stdout.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import analytics, mc, pickands, qp
from .errors import NumericalError, ValidationError
from .forest import ForestSpec, OrderKey, forest_asym, maximal_set
from .tree import TreeSpec, eigenstructure, sigma_matrix


class Table:
    def __init__(self, columns, rows):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(self.records()) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    return v


def _u_grid(text):
    try:
        us = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad u-grid {text!r}") from exc
    if not us:
        raise ValidationError("empty u-grid")
    if any(b <= a for a, b in zip(us, us[1:])):
        raise ValidationError(f"u-grid must increase strictly: {us}")
    return us


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _spec(args) -> TreeSpec:
    if not args.spec:
        raise ValidationError("--spec is required")
    return TreeSpec.from_json(_read(args.spec))


def _mc_config(args) -> mc.MCConfig:
    if args.seed is None:
        raise ValidationError("randomized subcommands need an explicit --seed")
    return mc.MCConfig(n=args.n, seed=args.seed, h=args.h)


def _pickands_config(args) -> pickands.PickandsConfig:
    if args.seed is None:
        raise ValidationError("randomized subcommands need an explicit --seed")
    return pickands.PickandsConfig(n=args.n, seed=args.seed)


# -- subcommands -----------------------------------------------------------------


def cmd_spectrum(args) -> Table:
    spec = _spec(args)
    t = spec.T if args.t is None else args.t
    es = eigenstructure(t, spec)
    return Table(["v", "mu_v", "mult"], [[v, float(mu), m] for v, (mu, m) in enumerate(es.pairs())])


def _asym(formula, u, spec, H):
    if formula in analytics.FORMULAS:
        return analytics.FORMULAS[formula](u, spec)
    if formula == "all_branch":
        return analytics.all_branch_asym(u, spec, _need_H(H))
    if formula == "bm_crossing":
        return analytics.bm_crossing_asym(u, spec.c, spec.T)
    if formula == "bm_crossing_exact":
        v = analytics.log_bm_crossing_exact(u, spec.c, spec.T)
        return analytics.AsymptoticsResult("bm_crossing_exact", u, v)
    if formula == "classical_bbm":
        return analytics.classical_bbm_asym(u, spec.c, spec.T)
    raise ValidationError(f"unknown formula {formula!r}")


def _need_H(H):
    if H is None:
        raise ValidationError("this formula needs --H")
    return H


ASYM_FORMULAS = sorted([*analytics.FORMULAS, "all_branch", "bm_crossing", "bm_crossing_exact", "classical_bbm"])


def cmd_asym(args) -> Table:
    spec = _spec(args)
    rows = []
    for u in _u_grid(args.u):
        r = _asym(args.formula, u, spec, args.H)
        rows.append([r.formula, u, r.value, r.log_value])
    return Table(["formula", "u", "value", "log_value"], rows)


def cmd_mc(args) -> Table:
    spec = _spec(args)
    cfg = _mc_config(args)
    rows = []
    for u in _u_grid(args.u):
        if args.tilted:
            e = mc.estimate_tilted(spec, args.event, u, cfg)
        else:
            e = mc.estimate(spec, args.event, u, cfg)
        d = e.to_dict()
        rows.append([u, d["p"], d["stderr"], d["n"], d["estimator"], d["seed"]])
    return Table(["u", "p", "stderr", "n", "estimator", "seed"], rows)


def cmd_pickands(args) -> Table:
    cfg = _pickands_config(args)
    if args.L is None:
        e = pickands.estimate_H(args.N, args.lam, cfg)
    else:
        e = pickands.estimate_H_drift(args.N, args.lam, args.L, cfg)
    d = e.to_dict()
    return Table(list(d), [list(d.values())])


def cmd_qp(args) -> Table:
    spec = _spec(args)
    t = spec.T if args.t is None else args.t
    S = sigma_matrix(t, spec)
    sol = qp.solve(S, np.ones(S.shape[0]))
    return Table(
        ["value", "I", "J", "a_tilde", "lambda"],
        [[sol.value, list(sol.I), list(sol.J), sol.a_tilde.tolist(), sol.lam.tolist()]],
    )


def cmd_forest(args) -> Table:
    forest = ForestSpec.from_json(_read(args.spec))
    A = set(maximal_set(forest))
    if args.u is None:
        rows = []
        for i, t in enumerate(forest.trees):
            k = OrderKey.of(t)
            rows.append([i, float(k.ratio), float(k.level), -k.neg_P, i in A])
        return Table(["tree", "mu0_over_P", "x_minus_cT", "P", "maximal"], rows)
    H = _need_H(args.H)
    Hs = {i: H for i in A}
    rows = []
    for u in _u_grid(args.u):
        r = forest_asym(u, forest, Hs)
        rows.append([u, r.value, r.log_value, sorted(A)])
    return Table(["u", "value", "log_value", "maximal"], rows)


def emit_ratio_table(spec: TreeSpec, u_grid, config: mc.MCConfig, H=None, pickands_config=None) -> Table:
    """Tilted all-branch estimates against their asymptotics over ``u_grid``.

    ``H`` defaults to 2 for a tree without branching points; otherwise it is
    estimated with ``pickands_config`` when not supplied.
    """
    if H is None:
        if spec.eta == 0:
            H = 2.0
        else:
            pc = pickands_config or pickands.PickandsConfig(n=20_000, seed=config.seed)
            H = pickands.estimate_H(spec.n_branches, 1.0 / spec.mu0, pc)
    rows = []
    for u in u_grid:
        e = mc.estimate_tilted(spec, mc.Event.ALL_BRANCH, u, config)
        a = analytics.all_branch_asym(u, spec, H).value
        rows.append([float(u), e.p, e.stderr, a, e.p / a, e.stderr / a])
    return Table(["u", "mc_estimate", "mc_stderr", "asym_value", "ratio", "ratio_stderr"], rows)


def cmd_ratio(args) -> Table:
    spec = _spec(args)
    cfg = _mc_config(args)
    return emit_ratio_table(spec, _u_grid(args.u), cfg, args.H, pickands.PickandsConfig(n=20_000, seed=cfg.seed))


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdtree", description="Brownian decision tree toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec=True, rand=False, u=False):
        if spec:
            sp.add_argument("--spec", help="tree (or forest) spec JSON file")
        if u:
            sp.add_argument("--u", help="comma-separated strictly increasing thresholds")
        if rand:
            sp.add_argument("--n", type=int, default=100_000)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--h", type=float)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = sub.add_parser("spectrum", help="eigenstructure of the covariance matrix")
    common(sp)
    sp.add_argument("--t", type=float)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("asym", help="asymptotic formula over a u-grid")
    common(sp, u=True)
    sp.add_argument("--formula", required=True, choices=ASYM_FORMULAS)
    sp.add_argument("--H", type=float)
    sp.set_defaults(func=cmd_asym)

    sp = sub.add_parser("mc", help="Monte Carlo event estimates")
    common(sp, rand=True, u=True)
    sp.add_argument("--event", default="AllBranch", choices=[e.value for e in mc.Event if e is not mc.Event.FOREST_ANY])
    sp.add_argument("--tilted", action="store_true")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("pickands", help="Pickands-type constant")
    common(sp, spec=False, rand=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--L", type=float)
    sp.set_defaults(func=cmd_pickands)

    sp = sub.add_parser("qp", help="solve the quadratic program at a = 1")
    common(sp)
    sp.add_argument("--t", type=float)
    sp.set_defaults(func=cmd_qp)

    sp = sub.add_parser("forest", help="tree order, maximal set and forest asymptotics")
    common(sp, u=True)
    sp.add_argument("--H", type=float)
    sp.set_defaults(func=cmd_forest)

    sp = sub.add_parser("ratio", help="MC / asymptotic convergence table")
    common(sp, rand=True, u=True)
    sp.add_argument("--H", type=float)
    sp.set_defaults(func=cmd_ratio)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "u", "") is None and args.command in ("asym", "mc", "ratio"):
            raise ValidationError("--u is required")
        if getattr(args, "n", 1) < 1:
            raise ValidationError("--n must be >= 1")
        text = args.func(args).render(args.format)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(run())
