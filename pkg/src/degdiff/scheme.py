"""Semi-implicit scheme for ``u_t = H(u - uc) (lap u + f)`` with obstacle clip.

One step freezes the switch at the old level, solves

    (I + (dt/h^2) z * A) u_new = u_old + dt z f

and snaps every node that fell below the obstacle back onto it. The run loop
checks the stationarity criterion ``max (u - uc)|lap u + f| < tol`` before each
step. Three step-size policies are available: fixed, adaptive (largest step
that the explicit contact estimate allows) and halving (retry with half the
step while too many nodes hit the obstacle at once).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from . import diagnostics
from ._accel import BACKEND
from .grid import Grid, laplacian, sample
from .linsolve import DEFAULT_LIN_TOL, assemble, solve_field
from .switch import EXACT, SwitchVariant, switch_field

POLICIES = ("fixed", "adaptive", "halving")
DT_FLOOR_EXPONENT = 20
GEOMETRIC_DENSE_STEPS = 32


class TimeStepError(RuntimeError):
    """The step size dropped below ``base_dt * 2**-20``."""


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Grid plus initial datum, obstacle and source as vectorized callables.

    A callable may be replaced by a number for constant data.
    """

    grid: Grid
    u0: Callable | float
    uc: Callable | float
    f: Callable | float = 0.0
    name: str = ""
    h1_violated: bool = False

    def __post_init__(self):
        u0, uc = self.u0_field, self.uc_field
        bnd = ~self.grid.interior
        if np.abs(self._field(self.u0, self.grid)[bnd]).max() > 1e-10:
            raise ValueError("initial datum must vanish on the boundary")
        if uc[bnd].max() > 1e-12:
            raise ValueError("obstacle must be <= 0 on the boundary")
        gap = (u0 - uc)[self.grid.interior]
        if gap.min() < 0:
            raise ValueError("initial datum lies below the obstacle")
        if not self.h1_violated and gap.min() <= 0:
            raise ValueError("initial datum touches the obstacle; set h1_violated=True to allow it")

    @staticmethod
    def _field(expr, grid):
        if callable(expr):
            return sample(expr, grid)
        return np.full(grid.shape, float(expr))

    @cached_property
    def u0_field(self) -> np.ndarray:
        u0 = self._field(self.u0, self.grid)
        u0[~self.grid.interior] = 0.0
        u0.setflags(write=False)
        return u0

    @cached_property
    def uc_field(self) -> np.ndarray:
        uc = self._field(self.uc, self.grid)
        uc.setflags(write=False)
        return uc

    @cached_property
    def f_field(self) -> np.ndarray:
        f = self._field(self.f, self.grid)
        f.setflags(write=False)
        return f

    def with_obstacle(self, uc, h1_violated=None):
        return replace(
            self, uc=uc, h1_violated=self.h1_violated if h1_violated is None else h1_violated
        )


@dataclass(frozen=True)
class SchemeConfig:
    gamma: float
    switch: SwitchVariant = EXACT
    policy: str = "fixed"
    tol: float = 1e-4
    t_max: float = 100.0
    safety: float = 1.0
    kappa: int = 2
    rho: int = 3
    # gaps at or below this are treated as contact by the adaptive estimate
    gap_floor: float = 1e-5
    lin_tol: float = DEFAULT_LIN_TOL
    snapshots: str = "geometric"
    contact_tol: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tol > 0 or not self.t_max > 0:
            raise ValueError("tol and t_max must be positive")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.snapshots not in ("geometric", "all"):
            raise ValueError("snapshots must be 'geometric' or 'all'")

    def base_dt(self, grid: Grid) -> float:
        return self.gamma * grid.h**2

    @property
    def eps_contact(self) -> float:
        """Contact-detection tolerance: exact equality for H, ``tol`` for eta_n."""
        if self.contact_tol is not None:
            return self.contact_tol
        return 0.0 if self.switch.exact else self.tol


@dataclass(frozen=True)
class FeasibilityReport:
    h1_nodes: np.ndarray  # bool mask: u0 > uc
    h2_values: np.ndarray  # lap_h uc + f, interior nodes (boundary 0)
    h2_nodes: np.ndarray  # bool mask: lap_h uc + f <= 0 (interior only)

    @property
    def h1_holds(self) -> bool:
        return bool(self.h1_nodes.all())

    @property
    def h2_holds(self) -> bool:
        return bool(self.h2_nodes.all())


def feasibility_check(p: ProblemSpec) -> FeasibilityReport:
    """Nodewise status of strict initial dominance and of ``lap uc + f <= 0``.

    Informational only: the scheme runs either way.
    """
    g = p.grid
    inner = g.interior
    h1 = (p.u0_field > p.uc_field)[inner]
    vals = laplacian(p.uc_field, g) + p.f_field
    vals = np.where(inner, vals, 0.0)
    h2 = (vals <= 0.0)[inner]
    return FeasibilityReport(h1, vals, h2)


def stop_measure(u, p: ProblemSpec) -> float:
    r = (u - p.uc_field) * np.abs(laplacian(u, p.grid) + p.f_field)
    return float(r[p.grid.interior].max())


def stopped(u, p: ProblemSpec, cfg: SchemeConfig) -> bool:
    return stop_measure(u, p) < cfg.tol


@dataclass
class _StepDetail:
    u_next: np.ndarray
    u_pre: np.ndarray
    z: np.ndarray
    new_contacts: np.ndarray  # bool mask
    sweeps: int


def _step_detail(u_k, p: ProblemSpec, cfg: SchemeConfig, dt: float) -> _StepDetail:
    grid = p.grid
    uc = p.uc_field
    z = switch_field(u_k, uc, cfg.switch, grid)
    gamma = dt / grid.h**2
    sys = assemble(z, gamma, grid)
    rhs = u_k + dt * z * p.f_field
    u_pre, sweeps = solve_field(sys, rhs, x0=u_k, tol_lin=cfg.lin_tol)
    below = (u_pre < uc) & grid.interior
    u_next = np.where(below, uc, u_pre)
    u_next[~grid.interior] = 0.0
    new = below & (u_k > uc)
    return _StepDetail(u_next, u_pre, z, new, sweeps)


def step(u_k, p: ProblemSpec, cfg: SchemeConfig, dt: float):
    """One scheme step; returns ``(u_next, new_contacts)`` with a boolean mask."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = _step_detail(np.asarray(u_k, dtype=float), p, cfg, dt)
    return d.u_next, d.new_contacts


@dataclass
class HalvingState:
    dt: float
    stable: int = 0


def adaptive_bound(u_k, p: ProblemSpec, cfg: SchemeConfig) -> float:
    """Smallest ``(u - uc) / -(lap u + f)`` over moving, descending nodes; inf if none."""
    z = switch_field(u_k, p.uc_field, cfg.switch, p.grid)
    drive = laplacian(u_k, p.grid) + p.f_field
    gap = u_k - p.uc_field
    cand = p.grid.interior & (z > 0) & (drive < 0) & (gap > cfg.gap_floor)
    if not cand.any():
        return math.inf
    return float(np.min(gap[cand] / -drive[cand]))


def choose_dt(u_k, p: ProblemSpec, cfg: SchemeConfig, state: HalvingState | None = None) -> float:
    base = cfg.base_dt(p.grid)
    if cfg.policy == "fixed":
        dt = base
    elif cfg.policy == "adaptive":
        dt = min(base, cfg.safety * adaptive_bound(u_k, p, cfg))
    else:
        dt = base if state is None else state.dt
    if dt < base * 2.0**-DT_FLOOR_EXPONENT:
        raise TimeStepError(f"time step {dt:.3e} below floor {base * 2.0**-DT_FLOOR_EXPONENT:.3e}")
    return dt


@dataclass
class RunResult:
    problem: ProblemSpec
    config: SchemeConfig
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    snapshot_steps: list = field(default_factory=list)
    diag: dict = field(default_factory=dict)
    dts: list = field(default_factory=list)
    final: np.ndarray | None = None
    T_star: float = 0.0
    iterations: int = 0
    steps: int = 0
    linear_solves: int = 0
    sweeps: int = 0
    rejected: int = 0
    termination: str = ""
    contact: diagnostics.ContactSet | None = None
    solver: str = "scheme"
    picard: object = None
    metadata: dict = field(default_factory=dict)

    @property
    def contact_bound(self) -> float:
        if self.problem.grid.dim != 1:
            return float("nan")
        return self.contact.bound

    def contact_history(self):
        """Contact masks of the stored snapshots."""
        eps = self.config.eps_contact
        g = self.problem.grid
        return [diagnostics.contact_set(u, self.problem.uc_field, g, eps).mask for u in self.snapshots]


DIAG_COLUMNS = ("t", "M", "I", "new_contacts", "dt", "flux_step", "clipped_mass")


class Recorder:
    """Accumulates the diagnostic series and the snapshot list of a run."""

    def __init__(self, p: ProblemSpec, cfg: SchemeConfig):
        self.p, self.cfg = p, cfg
        self.diag = {k: [] for k in DIAG_COLUMNS}
        self.times, self.snapshots, self.steps = [], [], []

    def record(self, k, t, u, *, dt=0.0, new=0, flux=0.0, clipped=0.0, force=False):
        p = self.p
        d = self.diag
        d["t"].append(t)
        d["M"].append(diagnostics.mass_excess(u, p.uc_field, p.grid))
        d["I"].append(diagnostics.interface_flux(u, p.uc_field, p.f_field, p.grid, self.cfg.switch))
        d["new_contacts"].append(int(new))
        d["dt"].append(dt)
        d["flux_step"].append(flux)
        d["clipped_mass"].append(clipped)
        if force or self._wanted(k):
            self._snap(k, t, u)

    def _wanted(self, k):
        if self.cfg.snapshots == "all" or k <= GEOMETRIC_DENSE_STEPS:
            return True
        return k & (k - 1) == 0

    def _snap(self, k, t, u):
        if self.steps and self.steps[-1] == k:
            return
        self.times.append(t)
        self.snapshots.append(np.array(u, copy=True))
        self.steps.append(k)

    def finish(self, k, t, u):
        self._snap(k, t, u)


def _metadata(p: ProblemSpec, cfg: SchemeConfig) -> dict:
    g = p.grid
    return {
        "problem": p.name,
        "switch": str(cfg.switch),
        "policy": cfg.policy,
        "gamma": cfg.gamma,
        "nodes": g.N + 1 if g.dim == 1 else g.Nx + 1,
        "h": g.h,
        "tol": cfg.tol,
        "lin_tol": cfg.lin_tol,
        "kappa": cfg.kappa,
        "rho": cfg.rho,
        "gap_floor": cfg.gap_floor,
        "safety": cfg.safety,
        "contact_tol": cfg.eps_contact,
        "backend": BACKEND,
    }


def run(p: ProblemSpec, cfg: SchemeConfig, dt_schedule=None) -> RunResult:
    """Iterate the scheme until the stopping criterion or the horizon.

    ``iterations`` counts loop passes, each of which evaluates the criterion,
    so a run stopped by the criterion took ``iterations - 1`` steps. With
    ``dt_schedule`` the given step sizes are replayed in order and the run also
    ends when the schedule is exhausted.
    """
    grid = p.grid
    base = cfg.base_dt(grid)
    u = np.array(p.u0_field, dtype=float)
    t = 0.0
    rec = Recorder(p, cfg)
    rec.record(0, t, u)
    res = RunResult(p, cfg, metadata=_metadata(p, cfg))
    halving = HalvingState(base)
    k = 0
    while True:
        res.iterations += 1
        if dt_schedule is not None:
            if k >= len(dt_schedule):
                res.termination = "schedule-exhausted"
                break
        elif stopped(u, p, cfg):
            res.termination = "stopped-by-criterion"
            break
        if t >= cfg.t_max * (1 - 1e-12):
            res.termination = "horizon-reached"
            break
        if dt_schedule is not None:
            dt = float(dt_schedule[k])
        else:
            dt = choose_dt(u, p, cfg, halving)
        while True:
            d = _step_detail(u, p, cfg, dt)
            res.linear_solves += 1
            res.sweeps += d.sweeps
            n_new = int(d.new_contacts.sum())
            if cfg.policy == "halving" and dt_schedule is None and n_new > cfg.kappa:
                res.rejected += 1
                halving.dt = dt = dt / 2.0
                halving.stable = 0
                choose_dt(u, p, cfg, halving)  # raises at the floor
                continue
            break
        if cfg.policy == "halving" and dt_schedule is None and halving.dt < base:
            halving.stable += 1
            if halving.stable >= cfg.rho:
                halving.dt, halving.stable = base, 0
        cell = grid.cell_measure
        inner = grid.interior
        flux = float((d.z * (laplacian(d.u_pre, grid) + p.f_field))[inner].sum()) * cell
        clipped = float((d.u_next - d.u_pre)[inner].sum()) * cell
        u = d.u_next
        t += dt
        k += 1
        res.dts.append(dt)
        rec.record(k, t, u, dt=dt, new=n_new, flux=flux, clipped=clipped)
    rec.finish(k, t, u)
    return _finalize(res, rec, u, t, k)


def _finalize(res: RunResult, rec: Recorder, u, t, k) -> RunResult:
    p = res.problem
    res.times, res.snapshots, res.snapshot_steps = rec.times, rec.snapshots, rec.steps
    res.diag = {key: np.asarray(v) for key, v in rec.diag.items()}
    res.final = u
    res.T_star = t
    res.steps = k
    res.contact = diagnostics.contact_set(u, p.uc_field, p.grid, res.config.eps_contact)
    return res


SUMMARY_COLUMNS = (
    "switch",
    "policy",
    "gamma",
    "N",
    "tol",
    "T*",
    "iterations",
    "linear_solves",
    "contact_bound",
    "termination",
)


def summary_row(res: RunResult) -> dict:
    g = res.problem.grid
    return {
        "switch": str(res.config.switch),
        "policy": res.config.policy,
        "gamma": res.config.gamma,
        "N": g.N + 1 if g.dim == 1 else g.Nx + 1,
        "tol": res.config.tol,
        "T*": res.T_star,
        "iterations": res.iterations,
        "linear_solves": res.linear_solves,
        "contact_bound": res.contact_bound,
        "termination": res.termination,
    }
