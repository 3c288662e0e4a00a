"""Implicit solver for the discrete parabolic obstacle problem.

Each step solves the complementarity problem ``y >= 0``, ``y + g A y - b >= 0``,
``y^T (y + g A y - b) = 0`` for ``y = w_new - uc`` through the piecewise-linear
equation ``[I + g A P(x)] x = b`` with ``P(x) = diag(H(x))`` and ``y = max(x, 0)``.
The equation is solved by the Picard loop on the active set, starting from an
empty set, until the set repeats.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid, check_field, laplacian
from .linsolve import assemble, solve_field
from .scheme import (
    ProblemSpec,
    Recorder,
    RunResult,
    SchemeConfig,
    _finalize,
    _metadata,
    stop_measure,
    stopped,
)

PL_RESIDUAL_TOL = 1e-10


class PicardError(RuntimeError):
    def __init__(self, message, previous=None, last=None):
        super().__init__(message)
        self.previous = previous
        self.last = last


class NotConvergedError(RuntimeError):
    pass


@dataclass
class PicardTrace:
    iterations: list = field(default_factory=list)  # per time step
    active_sizes: list = field(default_factory=list)  # per step, per iteration

    @property
    def total(self) -> int:
        return int(sum(self.iterations))


def _to_field(v, grid: Grid) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape == grid.shape:
        return np.where(grid.interior, v, 0.0)
    full = np.zeros(grid.shape)
    n_int = grid.n_interior
    if v.shape != (n_int,):
        raise ValueError(f"expected {n_int} interior values or a full field, got {v.shape}")
    if grid.dim == 1:
        full[1:-1] = v
    else:
        full[1:-1, 1:-1] = v.reshape(grid.Nx - 1, grid.Ny - 1)
    return full


def _from_field(full, grid: Grid) -> np.ndarray:
    if grid.dim == 1:
        return full[1:-1].copy()
    return full[1:-1, 1:-1].ravel().copy()


def pl_apply(x, gamma: float, grid: Grid) -> np.ndarray:
    """``[I + gamma A P(x)] x`` on interior values (full-field input allowed)."""
    xf = _to_field(x, grid)
    v = np.where(xf > 0, xf, 0.0)
    out = xf - gamma * grid.h**2 * laplacian(v, grid)
    return _from_field(out, grid)


def _pl_field(gamma, grid, b, max_picard, P0, lin_tol):
    inner = grid.interior
    P = np.zeros(grid.shape, dtype=bool) if P0 is None else (np.asarray(P0, dtype=bool) & inner)
    sizes = []
    prev = None
    x = None
    for _ in range(max_picard):
        if P.any():
            sys = assemble(P.astype(float), gamma, grid)
            v, _ = solve_field(sys, np.where(P, b, 0.0), x0=x, tol_lin=lin_tol)
            v = np.where(P, v, 0.0)
            # inactive rows: x_j = b_j - gamma (A v)_j
            x = np.where(P, v, b + gamma * grid.h**2 * laplacian(v, grid))
        else:
            x = b.copy()
        x[~inner] = 0.0
        newP = (x > 0) & inner
        sizes.append(int(newP.sum()))
        if np.array_equal(newP, P):
            return x, sizes
        prev, P = P, newP
    raise PicardError(
        f"active set still changing after {max_picard} Picard iterations",
        previous=np.argwhere(prev) if prev is not None else None,
        last=np.argwhere(P),
    )


def pl_solve(gamma: float, grid: Grid, b, max_picard: int | None = None, P0=None, lin_tol=1e-12):
    """Solve ``[I + gamma A P(x)] x = b``; returns ``(x, active_set_sizes)``.

    ``b`` holds interior values (or a full field whose boundary is ignored);
    ``x`` is returned in the same layout. The number of linear solves equals
    ``len(active_set_sizes)``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    full_in = np.shape(b) == grid.shape
    bf = _to_field(b, grid)
    if not np.all(np.isfinite(bf)):
        raise ValueError("b must be finite")
    if max_picard is None:
        # growing one node per iteration from the empty set, plus the confirming solve
        max_picard = grid.n_interior + 1
    x, sizes = _pl_field(gamma, grid, bf, max_picard, P0, lin_tol)
    res = np.abs(pl_apply(x, gamma, grid) - _from_field(bf, grid)).max(initial=0.0)
    if res > PL_RESIDUAL_TOL * (1.0 + np.abs(bf).max()):
        raise PicardError(f"piecewise-linear residual {res:.3e} too large")
    return (x if full_in else _from_field(x, grid)), sizes


def obstacle_rhs(w_k, p: ProblemSpec, gamma: float, dt: float) -> np.ndarray:
    """``b = w - uc + dt f - gamma A uc`` with ``A`` acting on interior values of uc."""
    g = p.grid
    uc_int = np.where(g.interior, p.uc_field, 0.0)
    b = w_k - p.uc_field + dt * p.f_field + gamma * g.h**2 * laplacian(uc_int, g)
    return np.where(g.interior, b, 0.0)


def obstacle_step(w_k, p: ProblemSpec, gamma: float, dt: float, P0=None, trace=None):
    """One implicit obstacle step; ``gamma`` must equal ``dt / h^2``."""
    g = p.grid
    w_k = check_field(w_k, g, "w")
    if not np.isclose(gamma, dt / g.h**2, rtol=1e-12):
        raise ValueError("gamma must equal dt / h^2")
    b = obstacle_rhs(w_k, p, gamma, dt)
    x, sizes = pl_solve(gamma, g, b, P0=P0)
    if trace is not None:
        trace.iterations.append(len(sizes))
        trace.active_sizes.append(sizes)
    w = np.where(g.interior, np.maximum(x, 0.0) + p.uc_field, 0.0)
    return w


def run_reference(p: ProblemSpec, cfg: SchemeConfig, dt_schedule=None, warm_start=False) -> RunResult:
    """Evolve the obstacle problem with the same loop and criterion as the scheme.

    Only fixed steps (``cfg.gamma``) or a replayed ``dt_schedule`` are used.
    ``warm_start`` seeds each Picard loop with the previous active set
    (off by default so solve counts match cold starts).
    """
    g = p.grid
    base = cfg.base_dt(g)
    w = np.array(p.u0_field, dtype=float)
    t = 0.0
    rec = Recorder(p, cfg)
    rec.record(0, t, w, flux=np.nan, clipped=np.nan)
    res = RunResult(p, cfg, solver="reference", metadata=_metadata(p, cfg))
    res.metadata["warm_start"] = warm_start
    trace = PicardTrace()
    P0 = None
    k = 0
    while True:
        res.iterations += 1
        if dt_schedule is not None:
            if k >= len(dt_schedule):
                res.termination = "schedule-exhausted"
                break
        elif stopped(w, p, cfg):
            res.termination = "stopped-by-criterion"
            break
        if t >= cfg.t_max * (1 - 1e-12):
            res.termination = "horizon-reached"
            break
        dt = base if dt_schedule is None else float(dt_schedule[k])
        w_new = obstacle_step(w, p, dt / g.h**2, dt, P0=P0, trace=trace)
        if warm_start:
            P0 = (w_new > p.uc_field) & g.interior
        new = int(((w_new == p.uc_field) & (w > p.uc_field) & g.interior).sum())
        w = w_new
        t += dt
        k += 1
        res.dts.append(dt)
        rec.record(k, t, w, dt=dt, new=new, flux=np.nan, clipped=np.nan)
    rec.finish(k, t, w)
    res.linear_solves = trace.total
    res.picard = trace
    return _finalize(res, rec, w, t, k)


def asymptotic_solution(p: ProblemSpec, cfg: SchemeConfig) -> np.ndarray:
    """Stationary obstacle solution by long-time evolution at ``tol / 10``."""
    tight = replace(cfg, tol=cfg.tol / 10.0, snapshots="geometric")
    res = run_reference(p, tight)
    if res.termination != "stopped-by-criterion":
        raise NotConvergedError(f"reference run ended by {res.termination} at t={res.T_star}")
    ubar = res.final
    if stop_measure(ubar, p) >= cfg.tol:
        raise NotConvergedError("complementarity residual above tolerance")
    return ubar
