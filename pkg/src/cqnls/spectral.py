"""Fourier calculus on the 3-torus (R/2piZ)^3.

Conventions used throughout the package:

    (F f)(xi) = (2pi)^{-3/2} * integral_T3 f(x) exp(-i x.xi) dx
    f(x)      = (2pi)^{-3/2} * sum_xi (F f)(xi) exp(i x.xi)

so Plancherel reads  integral |f|^2 dx = sum_xi |f_hat(xi)|^2  with no extra
factor.  The free propagator acts diagonally,

    (F exp(it Lap) f)(xi) = exp(-i t |xi|_theta^2) (F f)(xi),

where |xi|_theta^2 = theta_1 xi_1^2 + theta_2 xi_2^2 + theta_3 xi_3^2 is the
dispersion symbol.  theta = (1, 1, 1) is the square torus; other positive
weights model rescaled (irrational) tori without changing the mode lattice.

Fields are stored by their coefficients on the cube-truncated lattice
|xi_i| <= K, laid out as a (2K+1)^3 array indexed by xi + K per axis.
Physical samples live on a uniform n^3 grid, x_j = 2pi j / n, and are
transient: every operation returns to coefficient space.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as _fft

TWO_PI = 2.0 * np.pi
FOURIER_PREFACTOR = TWO_PI ** 1.5  # (2pi)^{3/2}


class ConfigurationError(ValueError):
    """Shape mismatch between data and grid, or insufficient padding."""


def fft_workers() -> int:
    """Worker count for FFT calls, capped by the CQNLS_THREADS env var."""
    raw = os.environ.get("CQNLS_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"CQNLS_THREADS must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ConfigurationError(f"CQNLS_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EquationParams:
    """Coefficients (mu1, mu2) of the nonlinearity mu1 |u|^2 u + mu2 |u|^4 u."""

    mu1: float
    mu2: float

    def __post_init__(self):
        for name in ("mu1", "mu2"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, float(value))


@dataclass(frozen=True)
class TorusGrid:
    """Cube-truncated Fourier lattice plus the physical sampling grid.

    Parameters
    ----------
    mode_radius : int
        Per-axis truncation K; retained modes satisfy |xi_i| <= K.
    phys_points : int, optional
        Physical points per axis.  Defaults to 3*(2K+1), which keeps the
        pointwise quintic product alias-free.  Smaller values (down to
        2K+1) are accepted for lean quadrature grids; quintic evaluation
        then refuses to run.
    theta : tuple of float
        Positive dispersion weights (theta_1, theta_2, theta_3).
    """

    mode_radius: int
    phys_points: int | None = None
    theta: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if int(self.mode_radius) != self.mode_radius or self.mode_radius < 1:
            raise ConfigurationError(f"mode_radius must be an integer >= 1, got {self.mode_radius}")
        object.__setattr__(self, "mode_radius", int(self.mode_radius))
        n_default = 3 * (2 * self.mode_radius + 1)
        n = n_default if self.phys_points is None else int(self.phys_points)
        if n < 2 * self.mode_radius + 1:
            raise ConfigurationError(
                f"phys_points={n} cannot represent modes up to K={self.mode_radius}; "
                f"need at least {2 * self.mode_radius + 1}"
            )
        object.__setattr__(self, "phys_points", n)
        th = tuple(float(t) for t in self.theta)
        if len(th) != 3 or any(not np.isfinite(t) or t <= 0 for t in th):
            raise ConfigurationError(f"theta must be three positive floats, got {self.theta}")
        object.__setattr__(self, "theta", th)

    @property
    def lattice_shape(self) -> tuple[int, int, int]:
        m = 2 * self.mode_radius + 1
        return (m, m, m)

    @property
    def mode_count(self) -> int:
        return (2 * self.mode_radius + 1) ** 3

    @property
    def has_quintic_padding(self) -> bool:
        return self.phys_points >= 3 * (2 * self.mode_radius + 1)

    @cached_property
    def modes(self) -> np.ndarray:
        """Per-axis mode values, -K..K, matching the coefficient layout."""
        k = self.mode_radius
        return np.arange(-k, k + 1)

    @cached_property
    def symbol_sq(self) -> np.ndarray:
        """Dispersion symbol |xi|_theta^2 on the lattice, shape (2K+1)^3."""
        m = self.modes.astype(float)
        t1, t2, t3 = self.theta
        return (
            t1 * m[:, None, None] ** 2
            + t2 * m[None, :, None] ** 2
            + t3 * m[None, None, :] ** 2
        )

    @cached_property
    def symbol(self) -> np.ndarray:
        """|xi|_theta on the lattice."""
        return np.sqrt(self.symbol_sq)

    @cached_property
    def japanese_bracket_sq(self) -> np.ndarray:
        """<xi>^2 = 1 + |xi|_theta^2 on the lattice."""
        return 1.0 + self.symbol_sq

    def cell_volume(self, phys_points: int | None = None) -> float:
        n = self.phys_points if phys_points is None else phys_points
        return (TWO_PI / n) ** 3

    def physical_axis(self, phys_points: int | None = None) -> np.ndarray:
        n = self.phys_points if phys_points is None else phys_points
        return TWO_PI * np.arange(n) / n

    def physical_mesh(self, phys_points: int | None = None):
        x = self.physical_axis(phys_points)
        return np.meshgrid(x, x, x, indexing="ij")


@dataclass(frozen=True)
class SpectralField:
    """A field on the torus, stored by Fourier coefficients.

    Coefficients are complex128 on the grid's (2K+1)^3 lattice and are
    treated as immutable after construction (a read-only view is kept).
    """

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=np.complex128)
        if arr.shape != self.grid.lattice_shape:
            raise ConfigurationError(
                f"coefficient array shape {arr.shape} does not match lattice {self.grid.lattice_shape}"
            )
        if not np.isfinite(arr.view(np.float64) if arr.flags.c_contiguous else arr).all():
            raise ValueError("non-finite coefficient encountered")
        view = arr.view()
        view.flags.writeable = False
        object.__setattr__(self, "coeffs", view)

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.coeffs, other.coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def scaled(self, factor: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * factor)


def _check_same_grid(a: TorusGrid, b: TorusGrid) -> None:
    if a != b:
        raise ConfigurationError("fields live on different grids")


def zero_field(grid: TorusGrid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.lattice_shape, dtype=np.complex128))


def mode_field(grid: TorusGrid, mode: tuple[int, int, int], amplitude: complex = 1.0) -> SpectralField:
    """Field with a single Fourier coefficient set: amplitude at xi = mode."""
    k = grid.mode_radius
    if any(abs(int(m)) > k for m in mode):
        raise ConfigurationError(f"mode {mode} outside the retained lattice |xi_i| <= {k}")
    coeffs = np.zeros(grid.lattice_shape, dtype=np.complex128)
    i, j, l = (int(m) + k for m in mode)
    coeffs[i, j, l] = amplitude
    return SpectralField(grid, coeffs)


def constant_field(grid: TorusGrid, value: complex) -> SpectralField:
    """Field that equals `value` everywhere in physical space."""
    return mode_field(grid, (0, 0, 0), value * FOURIER_PREFACTOR)


def _embed(grid: TorusGrid, coeffs: np.ndarray, n: int) -> np.ndarray:
    """Place lattice coefficients into a full n^3 FFT array (xi mod n)."""
    if n < 2 * grid.mode_radius + 1:
        raise ConfigurationError(f"{n} physical points cannot hold K={grid.mode_radius} modes")
    out = np.zeros((n, n, n), dtype=np.complex128)
    idx = grid.modes % n
    out[np.ix_(idx, idx, idx)] = coeffs
    return out


def _extract(grid: TorusGrid, spectrum: np.ndarray) -> np.ndarray:
    n = spectrum.shape[-1]
    idx = grid.modes % n
    return spectrum[np.ix_(idx, idx, idx)]


def forward_transform(grid: TorusGrid, samples: np.ndarray) -> SpectralField:
    """Transform physical samples to a SpectralField on the retained lattice.

    Content beyond the lattice (if any) is discarded; the quadrature is
    exact for trigonometric polynomials resolved by the sampling grid.
    """
    samples = np.asarray(samples, dtype=np.complex128)
    n = grid.phys_points
    if samples.shape != (n, n, n):
        raise ConfigurationError(
            f"sample array shape {samples.shape} does not match physical grid ({n},{n},{n})"
        )
    spectrum = _fft.fftn(samples, workers=fft_workers())
    coeffs = _extract(grid, spectrum) * (FOURIER_PREFACTOR / n**3)
    return SpectralField(grid, coeffs)


def inverse_transform(field: SpectralField, phys_points: int | None = None) -> np.ndarray:
    """Evaluate the field on the physical grid (default: the grid's own)."""
    grid = field.grid
    n = grid.phys_points if phys_points is None else int(phys_points)
    spectrum = _embed(grid, field.coeffs, n)
    return _fft.ifftn(spectrum, workers=fft_workers()) * (n**3 / FOURIER_PREFACTOR)


def apply_propagator(field: SpectralField, t: float) -> SpectralField:
    """Free Schrodinger flow exp(it Lap): multiply by exp(-i t |xi|_theta^2)."""
    phase = np.exp(-1j * float(t) * field.grid.symbol_sq)
    return SpectralField(field.grid, field.coeffs * phase)


def apply_gradient_square(field: SpectralField) -> float:
    """Return integral |grad u|^2 dx = sum |xi|_theta^2 |u_hat(xi)|^2."""
    c = field.coeffs
    return float(np.sum(field.grid.symbol_sq * (c.real**2 + c.imag**2)))


def evaluate_nonlinearity(field: SpectralField, params: EquationParams) -> SpectralField:
    """Dealiased evaluation of mu1 |u|^2 u + mu2 |u|^4 u.

    Computed pointwise on the padded physical grid and transformed back,
    then truncated to the retained lattice.  With the default padding,
    3*(2K+1) points per axis, the quintic product is alias-free, so the
    result equals the true convolution restricted to the lattice.
    """
    grid = field.grid
    if not grid.has_quintic_padding:
        raise ConfigurationError(
            f"phys_points={grid.phys_points} < 3*(2K+1)={3 * (2 * grid.mode_radius + 1)}: "
            "insufficient padding for a dealiased quintic product"
        )
    s = inverse_transform(field)
    mag2 = s.real**2 + s.imag**2
    w = (params.mu1 * mag2 + params.mu2 * mag2**2) * s
    return forward_transform(grid, w)


def nice_grid_size(minimum: int) -> int:
    """Smallest FFT-friendly (7-smooth) size >= minimum."""
    return _fft.next_fast_len(int(minimum), real=False)
