"""Command-line entry point: ``degdiff --test 1 --gamma 37.5 --compare``."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .diagnostics import sup_distance
from .experiments import (
    DEFAULT_GAMMA_1D,
    DEFAULT_GAMMA_2D,
    DEFAULT_NODES,
    parse_test_id,
    rows_to_csv,
    table1_csv,
    table1_sweep,
    write_outputs,
)
from .reference import run_reference
from .scheme import SchemeConfig, run, summary_row
from .switch import parse_switch


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degdiff", description="Run catalog experiments and the Test 1 sweep.")
    ap.add_argument("--test", help="test id 1..10 with optional variant suffix a, b or c")
    ap.add_argument("--switch", default="exact", help="exact or eta:<n>")
    ap.add_argument("--policy", default="fixed", choices=("fixed", "adaptive", "halving"))
    ap.add_argument("--gamma", type=float, help=f"dt/h^2 (default {DEFAULT_GAMMA_1D} in 1D, {DEFAULT_GAMMA_2D} in 2D)")
    ap.add_argument("--nodes", type=int, default=DEFAULT_NODES, help="total nodes per axis")
    ap.add_argument("--tol", type=float, default=1e-4, help="stopping tolerance")
    ap.add_argument("--tmax", type=float, default=100.0, help="time horizon")
    ap.add_argument("--compare", action="store_true", help="also run the reference obstacle solver")
    ap.add_argument("--out", help="directory for CSV outputs")
    ap.add_argument("--table1", action="store_true", help="run the Test 1 performance sweep")
    return ap


def run_experiment(args) -> int:
    tc, variant = parse_test_id(args.test)
    p = tc.problem(variant, args.nodes)
    gamma = args.gamma
    if gamma is None:
        gamma = DEFAULT_GAMMA_1D if tc.dim == 1 else DEFAULT_GAMMA_2D
    cfg = SchemeConfig(
        gamma=gamma,
        switch=parse_switch(args.switch),
        policy=args.policy,
        tol=args.tol,
        t_max=args.tmax,
        snapshots="all" if args.compare else "geometric",
    )
    res = run(p, cfg)
    extra = {}
    if args.compare:
        ref = run_reference(p, replace(cfg, policy="fixed"), dt_schedule=res.dts)
        extra = {
            "picard_total": ref.picard.total,
            "ref_linear_solves": ref.linear_solves,
            "sup_distance": sup_distance(res, ref),
        }
        if tc.dim == 2:
            extra["comparison"] = "experimental"
    if args.out:
        row = write_outputs(args.out, res, extra)
    else:
        row = summary_row(res)
        row.update(extra)
    sys.stdout.write(rows_to_csv([row], list(row)))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if not args.table1 and args.test is None:
        ap.error("one of --test or --table1 is required")
    try:
        if args.table1:
            text = table1_csv(table1_sweep(nodes=args.nodes))
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                with open(os.path.join(args.out, "table1.csv"), "w") as fh:
                    fh.write(text)
            sys.stdout.write(text)
            if args.test is None:
                return 0
        return run_experiment(args)
    except (KeyError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"degdiff: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
