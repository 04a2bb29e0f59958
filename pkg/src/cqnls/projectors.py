"""Littlewood-Paley and cube frequency projectors.

The dyadic pieces use one fixed smooth bump eta with eta = 1 on [0, 1] and
eta = 0 on [2, inf):

    eta(t) = g(2 - |t|) / (g(2 - |t|) + g(|t| - 1)),   g(r) = exp(-1/r) for r > 0 else 0.

Shell weights are eta_N(xi) = eta(|xi|_theta / N) - eta(2 |xi|_theta / N)
for dyadic N >= 2 and eta_1(xi) = eta(|xi|_theta).  Summed over dyadic N up
to (and past) the lattice's largest |xi|_theta they telescope to exactly 1,
so the family is a partition of unity on the retained lattice.  The shell
argument uses the theta-weighted |xi|, keeping the decomposition aligned
with the dispersion symbol on rescaled tori.

Cube projectors select half-open axis-aligned cubes z + size*[-1/2, 1/2)^3;
at the default size 1 with integer centers they pick out single modes.
"""
from __future__ import annotations

import numpy as np

from .spectral import ConfigurationError, SpectralField, TorusGrid


def bump_eta(t) -> np.ndarray | float:
    """Smooth even cutoff: 1 on |t| <= 1, 0 on |t| >= 2, strictly between elsewhere."""
    t = np.abs(np.asarray(t, dtype=float))
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.zeros(t.shape)
    out[t <= 1.0] = 1.0
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        tm = t[mid]
        g_hi = np.exp(-1.0 / (2.0 - tm))
        g_lo = np.exp(-1.0 / (tm - 1.0))
        out[mid] = g_hi / (g_hi + g_lo)
    return float(out[0]) if scalar else out


def is_dyadic(n) -> bool:
    n = int(n)
    return n >= 1 and (n & (n - 1)) == 0


def dyadic_shells(grid: TorusGrid) -> list[int]:
    """Dyadic shell indices 1, 2, 4, ... covering the retained lattice.

    The list stops at the first N >= max |xi|_theta; beyond it every shell
    weight vanishes identically on the lattice, and the retained family
    already sums to one pointwise.
    """
    top = float(np.max(grid.symbol))
    shells = [1]
    while shells[-1] < top:
        shells.append(2 * shells[-1])
    return shells


def shell_weight(grid: TorusGrid, n_shell: int) -> np.ndarray:
    """Multiplier eta_N(|xi|_theta) on the lattice."""
    if not is_dyadic(n_shell):
        raise ValueError(f"shell index must be a dyadic integer >= 1, got {n_shell}")
    s = grid.symbol
    if n_shell == 1:
        return bump_eta(s)
    return bump_eta(s / n_shell) - bump_eta(2.0 * s / n_shell)


def project_dyadic(field: SpectralField, n_shell: int) -> SpectralField:
    """Littlewood-Paley piece P_N u."""
    return SpectralField(field.grid, field.coeffs * shell_weight(field.grid, n_shell))


def cumulative_weight(grid: TorusGrid, cutoff: float, direction: str = "le") -> np.ndarray:
    """Multiplier for P_{<=N} (direction 'le') or P_{>N} (direction 'gt'),
    N = cutoff, any positive real.

    Both are literal dyadic sums of shell weights over the grid's shell
    list, so P_{<=N} + P_{>N} is exactly the identity on the lattice.
    """
    if not (cutoff > 0 and np.isfinite(cutoff)):
        raise ValueError(f"cutoff must be a positive real, got {cutoff}")
    if direction not in ("le", "gt"):
        raise ValueError(f"direction must be 'le' or 'gt', got {direction!r}")
    shells = dyadic_shells(grid)
    total = np.zeros(grid.lattice_shape)
    for m in shells:
        if (direction == "le") == (m <= cutoff):
            total += shell_weight(grid, m)
    return total


def project_cumulative(field: SpectralField, cutoff: float, direction: str = "le") -> SpectralField:
    return SpectralField(field.grid, field.coeffs * cumulative_weight(field.grid, cutoff, direction))


def cube_mask(grid: TorusGrid, center: tuple[int, int, int], size: float = 1.0) -> np.ndarray:
    """Boolean lattice mask for the half-open cube center + size*[-1/2, 1/2)^3."""
    if size <= 0:
        raise ValueError(f"cube size must be positive, got {size}")
    m = grid.modes.astype(float)
    half = 0.5 * float(size)
    masks = []
    for c in center:
        masks.append((m >= c - half) & (m < c + half))
    return masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]


def project_cube(field: SpectralField, center: tuple[int, int, int], size: float = 1.0) -> SpectralField:
    """Sharp cube projector P_C for C = center + size*[-1/2, 1/2)^3.

    With the default size 1 and an integer center this selects the single
    mode xi = center.
    """
    mask = cube_mask(field.grid, center, size)
    return SpectralField(field.grid, np.where(mask, field.coeffs, 0.0))
