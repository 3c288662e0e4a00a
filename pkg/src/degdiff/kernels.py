"""Inner loops: tridiagonal elimination and red-black SOR on the 5-point system.

Each kernel has a compiled path and a pure-numpy path. The active one is
chosen from ``DEGDIFF_BACKEND`` at import time (see ``_accel``); both stay
importable so tests and the benchmark can compare them.

The 2D sweep relaxes the row-scaled system

    (1 + 4*g*z_ij) x_ij - g*z_ij * (x_{i-1,j} + x_{i+1,j} + x_{i,j-1} + x_{i,j+1}) = r_ij

on interior nodes of a full ``(nx+1, ny+1)`` array. Rows with ``z_ij == 0``
are identity rows and are assigned ``r_ij`` exactly, never relaxed.
"""
import numpy as np

from ._accel import USE_NUMBA, jit_both


def _thomas(lower, diag, upper, rhs):
    # lower[0] and upper[-1] are ignored
    n = rhs.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if piv == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal elimination")
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if piv == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal elimination")
        cp[i] = upper[i] / piv
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


thomas_numba, thomas_numpy = jit_both(_thomas, cache=True)
thomas = thomas_numba if USE_NUMBA else thomas_numpy


def _residual_2d_loops(z, g, rhs, x):
    nx, ny = x.shape
    rmax = 0.0
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            gz = g * z[i, j]
            s = x[i - 1, j] + x[i + 1, j] + x[i, j - 1] + x[i, j + 1]
            r = abs(rhs[i, j] - ((1.0 + 4.0 * gz) * x[i, j] - gz * s))
            if r > rmax:
                rmax = r
    return rmax


residual_2d_numba, _ = jit_both(_residual_2d_loops, cache=True)


def _sor_2d_loops(z, g, rhs, x, omega, tol, max_sweeps, check_every):
    nx, ny = x.shape
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            if z[i, j] == 0.0:
                x[i, j] = rhs[i, j]
    rmax = residual_2d_numba(z, g, rhs, x)
    sweeps = 0
    while rmax > tol and sweeps < max_sweeps:
        for _ in range(check_every):
            for color in range(2):
                for i in range(1, nx - 1):
                    j0 = 1 + ((i + 1 + color) % 2)
                    for j in range(j0, ny - 1, 2):
                        zij = z[i, j]
                        if zij == 0.0:
                            continue
                        gz = g * zij
                        s = x[i - 1, j] + x[i + 1, j] + x[i, j - 1] + x[i, j + 1]
                        new = (rhs[i, j] + gz * s) / (1.0 + 4.0 * gz)
                        x[i, j] = x[i, j] + omega * (new - x[i, j])
            sweeps += 1
        rmax = residual_2d_numba(z, g, rhs, x)
    return sweeps, rmax


sor_2d_numba, _ = jit_both(_sor_2d_loops, cache=True)


def _checkerboard(shape):
    i, j = np.indices(shape)
    interior = np.zeros(shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    red = interior & ((i + j) % 2 == 0)
    black = interior & ((i + j) % 2 == 1)
    return red, black


def residual_2d_numpy(z, g, rhs, x):
    gz = g * z[1:-1, 1:-1]
    s = x[:-2, 1:-1] + x[2:, 1:-1] + x[1:-1, :-2] + x[1:-1, 2:]
    r = np.abs(rhs[1:-1, 1:-1] - ((1.0 + 4.0 * gz) * x[1:-1, 1:-1] - gz * s))
    return float(r.max()) if r.size else 0.0


def sor_2d_numpy(z, g, rhs, x, omega, tol, max_sweeps, check_every):
    frozen = np.zeros(x.shape, dtype=bool)
    frozen[1:-1, 1:-1] = z[1:-1, 1:-1] == 0.0
    x[frozen] = rhs[frozen]
    red, black = _checkerboard(x.shape)
    colors = (red & ~frozen, black & ~frozen)
    gz = g * z
    denom = 1.0 + 4.0 * gz
    rmax = residual_2d_numpy(z, g, rhs, x)
    sweeps = 0
    while rmax > tol and sweeps < max_sweeps:
        for _ in range(check_every):
            for mask in colors:
                s = np.zeros_like(x)
                s[1:-1, 1:-1] = x[:-2, 1:-1] + x[2:, 1:-1] + x[1:-1, :-2] + x[1:-1, 2:]
                new = (rhs + gz * s) / denom
                x[mask] = x[mask] + omega * (new[mask] - x[mask])
            sweeps += 1
        rmax = residual_2d_numpy(z, g, rhs, x)
    return sweeps, rmax


if USE_NUMBA:
    sor_2d = sor_2d_numba
    residual_2d = residual_2d_numba
else:
    sor_2d = sor_2d_numpy
    residual_2d = residual_2d_numpy
