"""Catalog of the ten benchmark problems and the drivers that run them."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import sup_distance
from .grid import build_grid_1d, build_grid_2d, write_field_csv
from .reference import run_reference
from .scheme import SUMMARY_COLUMNS, ProblemSpec, SchemeConfig, run, summary_row
from .switch import EXACT, SwitchVariant, smoothed

DEFAULT_NODES = 101
DEFAULT_GAMMA_1D = 37.5
DEFAULT_GAMMA_2D = 10.0


def _zero(*xs):
    return 0.0


def _const(c):
    def f(*xs):
        return np.full(np.shape(xs[0]), float(c))

    return f


@dataclass(frozen=True)
class TestCase:
    id: int
    dim: int
    domain: tuple
    u0: object
    uc: object
    # label -> source term, first entry is the default variant
    f_variants: dict
    expected: dict = field(default_factory=dict)
    h1_violated: bool = False
    description: str = ""
    # initial data selected by the "c" suffix
    u0_close: object = None

    __test__ = False  # not a pytest class

    def variant_ids(self):
        ids = [f"{self.id}{'ab'[i]}" for i in range(len(self.f_variants))]
        if self.u0_close is not None:
            ids.append(f"{self.id}c")
        return ids

    def grid(self, nodes: int = DEFAULT_NODES):
        if nodes < 4:
            raise ValueError("need at least 4 nodes per axis")
        if self.dim == 1:
            return build_grid_1d(*self.domain, nodes - 1)
        return build_grid_2d(*self.domain, nodes - 1)

    def problem(self, variant: str = "a", nodes: int = DEFAULT_NODES) -> ProblemSpec:
        labels = list(self.f_variants)
        if variant == "c":
            if self.u0_close is None:
                raise ValueError(f"test {self.id} has no variant c")
            u0, f = self.u0_close, self.f_variants[labels[0]]
        else:
            idx = "ab".index(variant)
            if idx >= len(labels):
                raise ValueError(f"test {self.id} has no variant {variant}")
            u0, f = self.u0, self.f_variants[labels[idx]]
        return ProblemSpec(
            self.grid(nodes), u0, self.uc, f, name=f"{self.id}{variant}", h1_violated=self.h1_violated
        )


def _t4_uc(x):
    return 0.5 - (2 * x**2 - 0.5) ** 2


def _t5_uc(x):
    return np.maximum.reduce([1 - 3 * np.abs(x), 0.5 - 4 * np.abs(x + 0.7), 0.4 - 8 * np.abs(x - 0.8)])


def _t6_uc(x):
    return np.where(x < 0, x + 0.5, 1 - x)


def _t9_uc(x, y):
    # chosen so that obstacle + 1 = u0 / 2
    return (2 - np.abs(x + y) - np.abs(y - x)) - 1


_CATALOG = {
    1: TestCase(
        1, 1, (-1.0, 1.0),
        u0=lambda x: 0.7 - 0.7 * x**2,
        uc=lambda x: 0.5 - 2 * x**2,
        f_variants={"0": _zero, "-1.5": _const(-1.5)},
        expected={"contact_bound": {"a": 0.14, "b": 0.26}},
        description="inverted parabola obstacle",
    ),
    2: TestCase(
        2, 1, (-1.0, 1.0),
        u0=lambda x: 1 / (1 + 10 * x**2) - 1 / 11,
        uc=lambda x: 0.5 - 2 * x**2,
        f_variants={"0": _zero},
        expected={"contact_bound": {"a": 0.14}},
        description="partially convex initial state, same limit as test 1",
    ),
    3: TestCase(
        3, 1, (-1.0, 1.0),
        u0=lambda x: (1 - x**2) * (1 + x**2) ** 3,
        uc=lambda x: 1 - 2 * x**2,
        f_variants={"0": _zero},
        expected={"contact_bound": {"a": 0.3}},
        h1_violated=True,
        description="initial contact at the origin",
    ),
    4: TestCase(
        4, 1, (-1.0, 1.0),
        u0=lambda x: 1 - x**2,
        uc=_t4_uc,
        f_variants={"0": _zero, "-4": _const(-4.0)},
        expected={"contact_bound": {"a": 0.6054, "b": 0.66}, "inner_gap": {"a": 0.5}},
        u0_close=lambda x: np.maximum(0.0, _t4_uc(x) + 0.1),
        description="two hills with a valley",
    ),
    5: TestCase(
        5, 1, (-1.0, 1.0),
        u0=lambda x: 1.6 - 1.6 * x**2,
        uc=_t5_uc,
        f_variants={"3x": lambda x: 3 * x},
        expected={"n_components": {"a": 3}},
        description="three peaks",
    ),
    6: TestCase(
        6, 1, (-1.0, 1.0),
        u0=lambda x: 2 - 2 * x**2,
        uc=_t6_uc,
        f_variants={"0": _zero},
        description="discontinuous obstacle",
    ),
    7: TestCase(
        7, 2, (-1.0, 1.0, -1.0, 1.0),
        u0=lambda x, y: 2 * (1 - x**2) * (1 - y**2),
        uc=lambda x, y: 1 - 2 * (x**2 + y**2),
        f_variants={"-1": _const(-1.0)},
        expected={"shape": {"a": "disk"}},
        description="reversed paraboloid",
    ),
    8: TestCase(
        8, 2, (-1.0, 1.0, -1.0, 1.0),
        u0=lambda x, y: 4 * (1 - x**2) * (1 - y**2),
        uc=lambda x, y: 1 - (3.5 * (x**2 + y**2) - 2) ** 2,
        f_variants={"0": _zero},
        expected={"shape": {"a": "annulus"}},
        description="crater",
    ),
    9: TestCase(
        9, 2, (-1.0, 1.0, -1.0, 1.0),
        u0=lambda x, y: 2 * (2 - np.abs(x + y) - np.abs(y - x)),
        uc=_t9_uc,
        f_variants={"0": _zero},
        expected={"shape": {"a": "diagonals"}},
        description="central pyramid",
    ),
    10: TestCase(
        10, 2, (-2.0, 2.0, -2.0, 2.0),
        u0=lambda x, y: (2 - 0.5 * x**2) * (2 - 0.5 * y**2),
        uc=lambda x, y: 1 + x**2 + 2 * y**2 - x**4 - y**4,
        f_variants={"0": _zero, "-2": _const(-2.0)},
        expected={"components": {"a": ">=2", "b": 1}},
        description="hills and valleys",
    ),
}


def catalog(test_id) -> TestCase:
    try:
        return _CATALOG[int(test_id)]
    except (KeyError, ValueError):
        raise KeyError(f"unknown test id {test_id!r}; expected 1..10") from None


def parse_test_id(text: str) -> tuple[TestCase, str]:
    """``"4c"`` -> (catalog(4), "c"); a bare number selects variant ``a``."""
    text = str(text).strip().lower()
    variant = "a"
    if text and text[-1] in "abc":
        text, variant = text[:-1], text[-1]
    return catalog(text), variant


TABLE1_ROWS = (
    (EXACT, "fixed", 375.0),
    (EXACT, "adaptive", 375.0),
    (EXACT, "fixed", 187.5),
    (smoothed(20), "fixed", 187.5),
    (EXACT, "adaptive", 187.5),
    (EXACT, "fixed", 150.0),
    (EXACT, "fixed", 75.0),
    (smoothed(50), "fixed", 75.0),
    (EXACT, "adaptive", 75.0),
    (EXACT, "fixed", 37.5),
    (EXACT, "fixed", 18.75),
    (EXACT, "fixed", 9.37),
)

TABLE1_COLUMNS = ("switch", "policy", "gamma", "T*", "iterations", "C_bound", "sup_distance")


def compare_runs(p: ProblemSpec, cfg: SchemeConfig):
    """Scheme run plus a reference run replaying the same step sizes."""
    cfg = replace(cfg, snapshots="all")
    res = run(p, cfg)
    ref = run_reference(p, cfg, dt_schedule=res.dts)
    return res, ref, sup_distance(res, ref)


def table1_row(switch: SwitchVariant, policy: str, gamma: float, nodes: int = DEFAULT_NODES, tol=1e-4):
    p = catalog(1).problem("a", nodes)
    cfg = SchemeConfig(gamma=gamma, switch=switch, policy=policy, tol=tol)
    res, ref, dist = compare_runs(p, cfg)
    return {
        "switch": switch.label,
        "policy": "F" if policy == "fixed" else "V",
        "gamma": gamma,
        "T*": res.T_star,
        "iterations": res.iterations,
        "C_bound": res.contact_bound,
        "sup_distance": dist,
        "ref_linear_solves": ref.linear_solves,
    }


def table1_sweep(workers: int | None = None, nodes: int = DEFAULT_NODES) -> list[dict]:
    """All twelve configurations of the Test 1 comparison, in table order.

    Rows run on a thread pool (one per CPU by default) and are collected in
    table order, so the output does not depend on scheduling.
    """
    args = list(TABLE1_ROWS)
    if workers is None:
        workers = min(len(args), os.cpu_count() or 1)
    if workers <= 1:
        return [table1_row(*a, nodes=nodes) for a in args]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda a: table1_row(*a, nodes=nodes), args))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.15g}"
    return str(v)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def table1_csv(rows=None) -> str:
    return rows_to_csv(table1_sweep() if rows is None else rows, TABLE1_COLUMNS)


def write_outputs(out_dir, res, extra_summary=None):
    """Write summary, diagnostics, contact set and snapshots for one run."""
    os.makedirs(out_dir, exist_ok=True)
    row = summary_row(res)
    if extra_summary:
        row.update(extra_summary)
    cols = list(SUMMARY_COLUMNS) + [c for c in row if c not in SUMMARY_COLUMNS]
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write(rows_to_csv([row], cols))
    d = res.diag
    with open(os.path.join(out_dir, "diag.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "M", "I", "new_contacts", "dt"])
        for k in range(len(d["t"])):
            w.writerow([_fmt(float(d["t"][k])), _fmt(float(d["M"][k])), _fmt(float(d["I"][k])),
                        int(d["new_contacts"][k]), _fmt(float(d["dt"][k]))])
    grid = res.problem.grid
    coords = res.contact.coordinates()
    with open(os.path.join(out_dir, "contact.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x"] if grid.dim == 1 else ["x", "y"])
        for c in coords:
            w.writerow([_fmt(float(v)) for v in c])
    for k, u in zip(res.snapshot_steps, res.snapshots):
        write_field_csv(os.path.join(out_dir, f"snap_{k}.csv"), u, grid)
    return row
