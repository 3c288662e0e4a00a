"""Uniform grids on intervals and rectangles, plus the discrete Laplacians.

Fields are plain float arrays shaped like ``grid.shape``: ``(N+1,)`` in 1D,
``(Nx+1, Ny+1)`` in 2D with ``u[i, j]`` the value at ``(x_i, y_j)``. Boundary
entries are stored explicitly and hold the Dirichlet value 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class SamplingError(ValueError):
    """An expression evaluated to a non-finite value at some node."""


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise ValueError(f"need a < b, got ({self.a}, {self.b})")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"need an integer N >= 2, got {self.N}")

    dim = 1

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def shape(self) -> tuple[int]:
        return (self.N + 1,)

    @property
    def n_nodes(self) -> int:
        return self.N + 1

    @property
    def n_interior(self) -> int:
        return self.N - 1

    @property
    def cell_measure(self) -> float:
        return self.h

    @cached_property
    def x(self) -> np.ndarray:
        x = self.a + np.arange(self.N + 1) * self.h
        x[-1] = self.b
        x.setflags(write=False)
        return x

    @cached_property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[0] = mask[-1] = False
        mask.setflags(write=False)
        return mask

    def coords(self):
        return (self.x,)


@dataclass(frozen=True)
class Grid2D:
    a: float
    b: float
    c: float
    d: float
    Nx: int
    Ny: int

    def __post_init__(self):
        if self.b <= self.a or self.d <= self.c:
            raise ValueError("need a < b and c < d")
        if min(self.Nx, self.Ny) < 2:
            raise ValueError("need at least 2 subdivisions per axis")
        hy = (self.d - self.c) / self.Ny
        if not np.isclose(hy, self.h, rtol=1e-12, atol=0.0):
            raise ValueError(f"unequal spacings hx={self.h} hy={hy}")

    dim = 2

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.Nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx + 1, self.Ny + 1)

    @property
    def n_nodes(self) -> int:
        return (self.Nx + 1) * (self.Ny + 1)

    @property
    def n_interior(self) -> int:
        return (self.Nx - 1) * (self.Ny - 1)

    @property
    def cell_measure(self) -> float:
        return self.h**2

    @cached_property
    def x(self) -> np.ndarray:
        x = self.a + np.arange(self.Nx + 1) * self.h
        x[-1] = self.b
        x.setflags(write=False)
        return x

    @cached_property
    def y(self) -> np.ndarray:
        y = self.c + np.arange(self.Ny + 1) * self.h
        y[-1] = self.d
        y.setflags(write=False)
        return y

    @cached_property
    def interior(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        mask.setflags(write=False)
        return mask

    def coords(self):
        return np.meshgrid(self.x, self.y, indexing="ij")


Grid = Grid1D | Grid2D


def build_grid_1d(a: float, b: float, N: int) -> Grid1D:
    """Uniform grid with ``N`` subdivisions (``N+1`` nodes) on ``[a, b]``."""
    if int(N) != N:
        raise ValueError(f"N must be an integer, got {N}")
    return Grid1D(float(a), float(b), int(N))


def build_grid_2d(a: float, b: float, c: float, d: float, N: int) -> Grid2D:
    """Uniform grid on ``[a,b] x [c,d]`` with ``N`` subdivisions along x.

    The y extent must be an integer multiple of ``h = (b-a)/N``.
    """
    if b <= a or d <= c:
        raise ValueError("need a < b and c < d")
    h = (b - a) / N
    ny = (d - c) / h
    Ny = int(round(ny))
    if abs(ny - Ny) > 1e-9 * max(1.0, ny):
        raise ValueError(f"height {d - c} is not a multiple of h={h}")
    return Grid2D(float(a), float(b), float(c), float(d), int(N), Ny)


def check_field(u, grid: Grid, name: str = "field") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise ValueError(f"{name} has shape {u.shape}, grid expects {grid.shape}")
    return u


def laplacian_1d(u, grid: Grid1D) -> np.ndarray:
    """Three-point second difference at interior nodes, 0 on the boundary."""
    if not isinstance(grid, Grid1D):
        raise ValueError("laplacian_1d needs a Grid1D")
    u = check_field(u, grid)
    out = np.zeros_like(u)
    out[1:-1] = (u[:-2] - 2.0 * u[1:-1] + u[2:]) / grid.h**2
    return out


def laplacian_2d(u, grid: Grid2D) -> np.ndarray:
    """Five-point Laplacian at interior nodes, 0 on the boundary."""
    if not isinstance(grid, Grid2D):
        raise ValueError("laplacian_2d needs a Grid2D")
    u = check_field(u, grid)
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = (
        u[2:, 1:-1] + u[:-2, 1:-1] - 4.0 * u[1:-1, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2]
    ) / grid.h**2
    return out


def laplacian(u, grid: Grid) -> np.ndarray:
    if grid.dim == 1:
        return laplacian_1d(u, grid)
    return laplacian_2d(u, grid)


def sample(expr, grid: Grid) -> np.ndarray:
    """Evaluate a vectorized expression at every node, boundary included.

    ``expr`` takes ``x`` (1D) or ``x, y`` (2D) arrays; a scalar result is
    broadcast. Raises :class:`SamplingError` naming the first bad node.
    """
    coords = grid.coords()
    with np.errstate(all="ignore"):
        vals = np.asarray(expr(*coords), dtype=float)
    vals = np.array(np.broadcast_to(vals, grid.shape), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(k) for k in np.argwhere(bad)[0])
        where = ", ".join(f"{c[idx]:.15g}" for c in coords)
        raise SamplingError(f"non-finite value {vals[idx]} at node {idx} = ({where})")
    return vals


def write_field_csv(path, u, grid: Grid) -> None:
    """Write ``x,value`` (1D) or ``x,y,value`` (2D) rows, 15 significant digits."""
    u = check_field(u, grid)
    cols = [c.ravel() for c in grid.coords()] + [u.ravel()]
    header = ["x", "value"] if grid.dim == 1 else ["x", "y", "value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.15g}" for v in row])


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`; returns ``(header, array)``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return header, data
