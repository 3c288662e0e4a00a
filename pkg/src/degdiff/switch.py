"""Diffusion switch: the extended Heaviside function and its C^1 smoothing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import check_field


@dataclass(frozen=True)
class SwitchVariant:
    """``n is None`` selects the exact Heaviside, otherwise the cubic ``eta_n``."""

    n: int | None = None

    def __post_init__(self):
        if self.n is not None and (int(self.n) != self.n or self.n < 1):
            raise ValueError(f"smoothing parameter must be an integer >= 1, got {self.n}")

    @property
    def exact(self) -> bool:
        return self.n is None

    def __call__(self, r):
        if self.n is None:
            return heaviside_exact(r)
        return eta(r, self.n)

    def __str__(self):
        return "exact" if self.n is None else f"eta:{self.n}"

    @property
    def label(self) -> str:
        # short name used in tables
        return "H" if self.n is None else f"eta{self.n}"


EXACT = SwitchVariant()


def smoothed(n: int) -> SwitchVariant:
    return SwitchVariant(int(n))


def parse_switch(text: str) -> SwitchVariant:
    """Parse ``exact`` or ``eta:<n>``."""
    text = text.strip().lower()
    if text in ("exact", "h"):
        return EXACT
    if text.startswith("eta:"):
        try:
            n = int(text[4:])
        except ValueError:
            raise ValueError(f"bad smoothing parameter in {text!r}") from None
        return SwitchVariant(n)
    raise ValueError(f"unknown switch {text!r}; expected 'exact' or 'eta:<n>'")


def heaviside_exact(r):
    """1 where ``r > 0``, else 0 (so ``H(0) = 0``)."""
    out = np.where(np.asarray(r) > 0, 1.0, 0.0)
    return float(out) if out.ndim == 0 else out


def eta(r, n: int):
    """C^1 cubic ramp from 0 at ``r = 0`` to 1 at ``r = 1/n``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n}")
    r = np.asarray(r, dtype=float)
    s = n * r
    ramp = s * s * (3.0 - 2.0 * s)
    out = np.where(r > 1.0 / n, 1.0, np.where(r < 0.0, 0.0, ramp))
    return float(out) if out.ndim == 0 else out


def switch_field(u, uc, variant: SwitchVariant, grid) -> np.ndarray:
    """Switch values ``variant(u - uc)`` at interior nodes, 0 on the boundary."""
    u = check_field(u, grid, "u")
    uc = check_field(uc, grid, "uc")
    z = np.asarray(variant(u - uc), dtype=float)
    z = np.where(grid.interior, z, 0.0)
    return z
