"""Per-step implicit systems ``(I + gamma * z * A) u = rhs``.

``A`` is the unscaled Dirichlet Laplacian matrix (stencil ``[-1, 2, -1]`` in 1D,
``[-1, -1, 4, -1, -1]`` in 2D) on interior nodes, and ``z * A`` multiplies row
``j`` of ``A`` by ``z_j``. A row with ``z_j = 0`` is an identity row.

The 1D system is eliminated directly; the 2D system is relaxed by red-black
SOR. Identity rows come out bitwise equal to their right-hand side in both.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import Grid, Grid1D, Grid2D, check_field, laplacian

DEFAULT_LIN_TOL = 1e-10


class LinearSolveError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class RowScaledSystem:
    grid: Grid
    gamma: float
    z: np.ndarray  # full field, zero on the boundary

    @property
    def structure(self) -> str:
        return "tridiagonal" if self.grid.dim == 1 else "5-band"

    def bands(self):
        """``(lower, diag, upper)`` of the 1D tridiagonal matrix."""
        if self.grid.dim != 1:
            raise ValueError("bands() is only defined for 1D systems")
        gz = self.gamma * self.z[1:-1]
        return -gz, 1.0 + 2.0 * gz, -gz.copy()

    def to_dense(self) -> np.ndarray:
        """Dense interior matrix; test oracle only."""
        g = self.gamma
        if self.grid.dim == 1:
            lo, di, up = self.bands()
            n = di.size
            M = np.diag(di)
            M[np.arange(1, n), np.arange(n - 1)] = lo[1:]
            M[np.arange(n - 1), np.arange(1, n)] = up[:-1]
            return M
        nx, ny = self.grid.Nx - 1, self.grid.Ny - 1
        zi = self.z[1:-1, 1:-1]
        M = np.zeros((nx * ny, nx * ny))
        for i in range(nx):
            for j in range(ny):
                k = i * ny + j
                gz = g * zi[i, j]
                M[k, k] = 1.0 + 4.0 * gz
                for di_, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    ii, jj = i + di_, j + dj
                    if 0 <= ii < nx and 0 <= jj < ny:
                        M[k, ii * ny + jj] = -gz
        return M

    def apply(self, u) -> np.ndarray:
        """Matrix-vector product on a full field (boundary rows are identity)."""
        u = check_field(u, self.grid)
        return u - self.gamma * self.z * self.grid.h**2 * laplacian(u, self.grid)


def assemble(z, gamma: float, grid: Grid) -> RowScaledSystem:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    z = check_field(z, grid, "z")
    zi = z[grid.interior]
    if np.any(zi < 0.0) or np.any(zi > 1.0) or not np.all(np.isfinite(zi)):
        raise ValueError("switch values must lie in [0, 1]")
    z = np.where(grid.interior, z, 0.0)
    return RowScaledSystem(grid, float(gamma), z)


def solve_direct_1d(sys: RowScaledSystem, rhs) -> np.ndarray:
    """Thomas elimination; ``rhs`` holds the interior values only."""
    if not isinstance(sys.grid, Grid1D):
        raise ValueError("solve_direct_1d needs a 1D system")
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if rhs.shape != (sys.grid.n_interior,):
        raise ValueError(f"rhs must have {sys.grid.n_interior} entries, got {rhs.shape}")
    lo, di, up = sys.bands()
    try:
        return kernels.thomas(lo, di, up, rhs)
    except ZeroDivisionError as exc:  # excluded by diagonal dominance
        raise LinearSolveError(f"internal error: {exc}") from exc


def sor_omega(sys: RowScaledSystem) -> float:
    """Relaxation factor from the Jacobi radius of ``I + gamma*A`` (z = 1 bound)."""
    g = sys.gamma * float(sys.z.max(initial=0.0))
    if g == 0.0:
        return 1.0
    c = 0.5 * (np.cos(np.pi / sys.grid.Nx) + np.cos(np.pi / sys.grid.Ny))
    rho = 4.0 * g * c / (1.0 + 4.0 * g)
    return 2.0 / (1.0 + np.sqrt(1.0 - rho * rho))


def solve_field_2d(sys: RowScaledSystem, rhs, x0=None, tol_lin=DEFAULT_LIN_TOL, max_it=None):
    """Solve on full ``(Nx+1, Ny+1)`` arrays; boundary entries of ``rhs`` are copied.

    Returns ``(x, sweeps)``. Stops when the max-norm residual is at most
    ``tol_lin * (1 + max|rhs|)``.
    """
    if not isinstance(sys.grid, Grid2D):
        raise ValueError("solve_field_2d needs a 2D system")
    if not tol_lin > 0:
        raise ValueError("tol_lin must be positive")
    rhs = np.ascontiguousarray(check_field(rhs, sys.grid, "rhs"))
    if max_it is None:
        max_it = 10 * sys.grid.n_interior
    x = rhs.copy() if x0 is None else np.array(check_field(x0, sys.grid, "x0"), dtype=float)
    x[~sys.grid.interior] = rhs[~sys.grid.interior]
    target = tol_lin * (1.0 + float(np.abs(rhs[sys.grid.interior]).max(initial=0.0)))
    sweeps, res = kernels.sor_2d(
        np.ascontiguousarray(sys.z), sys.gamma, rhs, x, sor_omega(sys), target, int(max_it), 2
    )
    if res > target:
        raise LinearSolveError(
            f"SOR did not converge in {sweeps} sweeps (residual {res:.3e} > {target:.3e})", res
        )
    return x, int(sweeps)


def solve_iterative_2d(sys: RowScaledSystem, rhs, tol_lin=DEFAULT_LIN_TOL, max_it=None) -> np.ndarray:
    """Iterative solve; ``rhs`` holds the interior values in row-major order."""
    if not isinstance(sys.grid, Grid2D):
        raise ValueError("solve_iterative_2d needs a 2D system")
    nx, ny = sys.grid.Nx - 1, sys.grid.Ny - 1
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (nx * ny,):
        raise ValueError(f"rhs must have {nx * ny} entries, got {rhs.shape}")
    full = np.zeros(sys.grid.shape)
    full[1:-1, 1:-1] = rhs.reshape(nx, ny)
    x, _ = solve_field_2d(sys, full, tol_lin=tol_lin, max_it=max_it)
    return x[1:-1, 1:-1].ravel()


def solve_field(sys: RowScaledSystem, rhs, x0=None, tol_lin=DEFAULT_LIN_TOL):
    """Dimension-agnostic full-field solve with zero boundary; returns ``(u, sweeps)``."""
    grid = sys.grid
    rhs = check_field(rhs, grid, "rhs")
    if grid.dim == 1:
        u = np.zeros(grid.shape)
        u[1:-1] = solve_direct_1d(sys, rhs[1:-1])
        return u, 0
    rhs = np.where(grid.interior, rhs, 0.0)
    return solve_field_2d(sys, rhs, x0=x0, tol_lin=tol_lin)
