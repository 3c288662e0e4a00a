"""Scalar functionals of a run: excess mass, switched flux, contact sets, fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import Grid, check_field, laplacian
from .switch import SwitchVariant, switch_field

# 4-neighbour connectivity for 2D component counts
_CROSS = ndimage.generate_binary_structure(2, 1)


def _interior_sum(v, grid: Grid) -> float:
    return float(v[grid.interior].sum()) * grid.cell_measure


def mass_excess(u, uc, grid: Grid) -> float:
    """Rectangle rule for the integral of ``u - uc`` over interior nodes."""
    u = check_field(u, grid, "u")
    uc = check_field(uc, grid, "uc")
    return _interior_sum(u - uc, grid)


def interface_flux(u, uc, f, grid: Grid, variant: SwitchVariant) -> float:
    """Rectangle rule for the integral of ``z * (lap u + f)``, the discrete dM/dt."""
    z = switch_field(u, uc, variant, grid)
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    return _interior_sum(z * (laplacian(u, grid) + f), grid)


@dataclass(frozen=True)
class ContactSet:
    mask: np.ndarray  # bool, shape of the grid, never true on the boundary
    grid: Grid

    @property
    def indices(self) -> np.ndarray:
        return np.argwhere(self.mask)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def bound(self) -> float:
        """Largest ``|x|`` among contacted nodes (1D); NaN when empty."""
        if self.grid.dim != 1:
            raise ValueError("bound is defined for 1D contact sets")
        if not self.mask.any():
            return float("nan")
        return float(np.abs(self.grid.x[self.mask]).max())

    @property
    def right_extremum(self) -> float:
        if not self.mask.any():
            return float("nan")
        return float(self.grid.x[self.mask].max())

    @property
    def n_components(self) -> int:
        if self.grid.dim == 1:
            m = self.mask.astype(np.int8)
            return int(np.count_nonzero(np.diff(np.concatenate(([0], m))) == 1))
        return int(ndimage.label(self.mask, structure=_CROSS)[1])

    @property
    def complement_components(self) -> int:
        """Components of the non-contact region; an annulus gives 2."""
        if self.grid.dim == 1:
            m = (~self.mask).astype(np.int8)
            return int(np.count_nonzero(np.diff(np.concatenate(([0], m))) == 1))
        return int(ndimage.label(~self.mask, structure=_CROSS)[1])

    def coordinates(self) -> np.ndarray:
        """Coordinates of contacted nodes, one row per node."""
        coords = [c[self.mask] for c in self.grid.coords()]
        return np.column_stack(coords) if coords else np.empty((0, self.grid.dim))


def contact_set(u, uc, grid: Grid, eps_c: float = 0.0) -> ContactSet:
    if eps_c < 0:
        raise ValueError("eps_c must be nonnegative")
    u = check_field(u, grid, "u")
    uc = check_field(uc, grid, "uc")
    mask = (u - uc <= eps_c) & grid.interior
    return ContactSet(mask, grid)


def sup_distance(run_a, run_b) -> float:
    """``max_k ||u^k - w^k||_inf`` over snapshot-aligned runs."""
    if run_a.problem.grid != run_b.problem.grid:
        raise ValueError("runs live on different grids")
    ta, tb = np.asarray(run_a.times), np.asarray(run_b.times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=1e-12, atol=1e-14):
        raise ValueError("runs have different snapshot times")
    return max(float(np.abs(a - b).max()) for a, b in zip(run_a.snapshots, run_b.snapshots))


@dataclass(frozen=True)
class BalanceCheck:
    max_defect: float
    defect: np.ndarray  # |dM/dt - flux - clip/dt| per step
    raw_defect: np.ndarray  # |dM/dt - flux| per step, before adding the clip back
    clip_rate: np.ndarray  # clipped mass / dt per step


def discrete_balance_check(run) -> BalanceCheck:
    """Compare ``(M^{k+1} - M^k)/dt`` with the flux of the linear solve.

    The flux is taken at the implicit (pre-clip) state so the two sides come
    from the same solve; clipping adds mass, reported in ``clip_rate``.
    """
    d = run.diag
    if len(d["t"]) < 2:
        raise ValueError("need at least two recorded states")
    dt = np.asarray(d["dt"][1:])
    rate = np.diff(np.asarray(d["M"])) / dt
    flux = np.asarray(d["flux_step"][1:])
    clip = np.asarray(d["clipped_mass"][1:]) / dt
    raw = np.abs(rate - flux)
    defect = np.abs(rate - flux - clip)
    return BalanceCheck(float(defect.max()), defect, raw, clip)


def h1_distance(u, v, grid: Grid) -> float:
    """Discrete H^1 norm of ``u - v``: L2 part plus forward differences."""
    e = check_field(u, grid) - check_field(v, grid)
    w = grid.cell_measure
    total = w * float(np.sum(e[grid.interior] ** 2))
    for axis in range(grid.dim):
        total += w * float(np.sum((np.diff(e, axis=axis) / grid.h) ** 2))
    return float(np.sqrt(total))


@dataclass(frozen=True)
class RateFit:
    C_hat: float
    residual: float  # RMS misfit of log d over the log-range in the window
    window: tuple[float, float]
    n_points: int
    fallback_window: bool  # True when T* < 1 forced the last-half window


def convergence_rate(run, ubar, t_start: float = 1.0) -> RateFit:
    """Least-squares exponential rate of the H^1 distance to ``ubar``."""
    grid = run.problem.grid
    times = np.asarray(run.times, dtype=float)
    t_end = float(times[-1])
    fallback = t_end < t_start
    lo = 0.5 * t_end if fallback else t_start
    d = np.array([h1_distance(u, ubar, grid) for u in run.snapshots])
    keep = (times >= lo) & (times <= t_end) & (d >= 1e-14)
    if keep.sum() < 3:
        raise ValueError(f"only {int(keep.sum())} unsaturated snapshots in [{lo}, {t_end}]")
    t, y = times[keep], np.log(d[keep])
    slope, icpt = np.polyfit(t, y, 1)
    span = float(y.max() - y.min())
    rms = float(np.sqrt(np.mean((y - (slope * t + icpt)) ** 2)))
    rel = rms / span if span > 0 else float("inf")
    return RateFit(float(-slope), rel, (float(lo), t_end), int(keep.sum()), fallback)


def h1_distance_series(run, ubar) -> tuple[np.ndarray, np.ndarray]:
    grid = run.problem.grid
    d = np.array([h1_distance(u, ubar, grid) for u in run.snapshots])
    return np.asarray(run.times, dtype=float), d
