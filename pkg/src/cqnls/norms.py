"""Conserved quantities, Sobolev and space-time norms, and norm proxies.

Mass and energy follow

    M(u) = integral |u|^2 dx,
    E(u) = integral 1/2 |grad u|^2 + (mu1/4) |u|^4 + (mu2/6) |u|^6 dx.

The critical-norm diagnostics are trajectory-level lower-bound proxies.
Atomic-decomposition space-time norms cannot be evaluated exactly from a
sampled trajectory, so the package computes the discrete quantities below
and names them *_proxy everywhere:

* ``discrete_two_variation``: largest sum of squared increments over
  subpartitions of the sample times (exact on the given time grid).
* ``v2_delta_proxy``: two-variation of t -> exp(-it Lap) u(t) in H^s.
* ``y_norm_proxy``: mode-wise (unit-cube) version with <z>^{2s} weights.
* ``x1_proxy``: max of the sup-grid H^1 norm and the s = 1 cube proxy;
  paired with the Z norm it yields ``zprime = sqrt(z * x1)``.

The Z norm itself is a genuine discrete evaluation: a sup over windows of
at most unit length of the dyadic-weighted L^4 space-time sums.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize_scalar

from .projectors import dyadic_shells, shell_weight
from .spectral import (
    ConfigurationError,
    EquationParams,
    SpectralField,
    TorusGrid,
    apply_gradient_square,
    inverse_transform,
    nice_grid_size,
)

TIME_TOL = 1e-9
WINDOW_CAP = 1.0  # Z-norm windows are at most this long


class UnsupportedRegimeError(ValueError):
    """Raised when a quantity is undefined for the given coefficients."""


@dataclass(frozen=True)
class TimeInterval:
    start: float
    end: float

    def __post_init__(self):
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise ValueError("interval endpoints must be finite")
        if self.end <= self.start:
            raise ValueError(f"interval must have end > start, got [{self.start}, {self.end}]")

    @property
    def length(self) -> float:
        return self.end - self.start

    def contains(self, t: float, tol: float = TIME_TOL) -> bool:
        return self.start - tol <= t <= self.end + tol


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled field history on a fixed grid.

    Coefficients are stacked as one (nodes, 2K+1, 2K+1, 2K+1) array;
    ``field(k)`` wraps a read-only view.  ``energies`` optionally carries
    per-node energy measurements recorded by an integrator.
    """

    grid: TorusGrid
    params: EquationParams
    times: np.ndarray
    coeffs: np.ndarray
    energies: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if t.ndim != 1:
            raise ValueError("times must be a 1-d array")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if c.shape != (t.size, *self.grid.lattice_shape):
            raise ConfigurationError(
                f"coefficient stack shape {c.shape} does not match "
                f"({t.size}, *{self.grid.lattice_shape})"
            )
        tv = t.view()
        tv.flags.writeable = False
        cv = c.view()
        cv.flags.writeable = False
        object.__setattr__(self, "times", tv)
        object.__setattr__(self, "coeffs", cv)
        if self.energies is not None:
            e = np.asarray(self.energies, dtype=float)
            if e.shape != t.shape:
                raise ValueError("energies must match times in shape")
            ev = e.view()
            ev.flags.writeable = False
            object.__setattr__(self, "energies", ev)

    @property
    def node_count(self) -> int:
        return self.times.size

    @property
    def interval(self) -> TimeInterval:
        if self.node_count == 0:
            raise ValueError("empty trajectory has no interval")
        return TimeInterval(self.times[0], self.times[-1])

    def field(self, k: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[k])

    @property
    def fields(self) -> list[SpectralField]:
        return [self.field(k) for k in range(self.node_count)]

    @classmethod
    def from_fields(cls, fields, times, params: EquationParams, energies=None) -> "Trajectory":
        fields = list(fields)
        if not fields:
            raise ValueError("a trajectory needs at least one field")
        grid = fields[0].grid
        stack = np.stack([f.coeffs for f in fields])
        return cls(grid, params, np.asarray(times, dtype=float), stack, energies)

    def node_indices(self, interval: TimeInterval) -> np.ndarray:
        if self.node_count == 0:
            raise ValueError("empty trajectory has no nodes")
        if (interval.start < self.times[0] - TIME_TOL
                or interval.end > self.times[-1] + TIME_TOL):
            raise ValueError(
                f"window [{interval.start}, {interval.end}] exceeds the stored "
                f"interval [{self.times[0]}, {self.times[-1]}]"
            )
        mask = (self.times >= interval.start - TIME_TOL) & (self.times <= interval.end + TIME_TOL)
        idx = np.nonzero(mask)[0]
        if idx.size < 1:
            raise ValueError(f"no trajectory nodes inside [{interval.start}, {interval.end}]")
        return idx

    def restrict(self, interval: TimeInterval) -> "Trajectory":
        idx = self.node_indices(interval)
        e = None if self.energies is None else self.energies[idx[0] : idx[-1] + 1]
        return Trajectory(
            self.grid,
            self.params,
            self.times[idx[0] : idx[-1] + 1],
            self.coeffs[idx[0] : idx[-1] + 1],
            e,
        )

    @cached_property
    def flat_coeffs(self) -> np.ndarray:
        """(nodes, mode_count) view of the coefficient stack."""
        return self.coeffs.reshape(self.node_count, -1)

    @cached_property
    def h1_series(self) -> np.ndarray:
        w = self.grid.japanese_bracket_sq.reshape(-1)
        c = self.flat_coeffs
        return np.sqrt(np.sum(w * (c.real**2 + c.imag**2), axis=1))


def mass(field: SpectralField) -> float:
    """Plancherel evaluation of integral |u|^2 dx."""
    c = field.coeffs
    return float(np.sum(c.real**2 + c.imag**2))


def potential_terms(field: SpectralField) -> tuple[float, float]:
    """(integral |u|^4 dx, integral |u|^6 dx) by padded physical quadrature."""
    s = inverse_transform(field)
    mag2 = s.real**2 + s.imag**2
    vol = field.grid.cell_volume()
    return float(np.sum(mag2**2) * vol), float(np.sum(mag2**3) * vol)


def energy(field: SpectralField, params: EquationParams) -> float:
    """E(u) = 1/2 ||grad u||^2 + (mu1/4) ||u||_4^4 + (mu2/6) ||u||_6^6."""
    quartic, sextic = potential_terms(field)
    return 0.5 * apply_gradient_square(field) + params.mu1 / 4.0 * quartic + params.mu2 / 6.0 * sextic


def sobolev_norm(field: SpectralField, s: float) -> float:
    """H^s norm with the theta-weighted bracket <xi>^2 = 1 + |xi|_theta^2."""
    c = field.coeffs
    w = field.grid.japanese_bracket_sq ** float(s)
    return float(np.sqrt(np.sum(w * (c.real**2 + c.imag**2))))


def kinetic_bound_constant(params: EquationParams) -> float:
    """Smallest C >= 0 with -(|mu1|/4) x^2 + (mu2/6) x^3 >= -C x for x >= 0.

    Found by one-dimensional maximization of (|mu1|/4) x - (mu2/6) x^2 on
    the interval where that expression is positive.  Defocusing or absent
    cubic terms need no compensation, so C = 0 when mu1 >= 0.
    """
    if params.mu2 <= 0:
        raise UnsupportedRegimeError(f"kinetic bound requires mu2 > 0, got mu2 = {params.mu2}")
    if params.mu1 >= 0:
        return 0.0
    a = abs(params.mu1) / 4.0
    b = params.mu2 / 6.0
    # (a - b x) x is negative beyond x = a / b, so the maximum lies inside.
    hi = a / b
    res = minimize_scalar(lambda x: -(a - b * x) * x, bounds=(0.0, hi), method="bounded",
                          options={"xatol": 1e-12 * max(hi, 1.0)})
    return float(max(0.0, -res.fun))


def _quadrature_points(grid: TorusGrid, power: int) -> int:
    """Physical points per axis for exact integration of |u|^power."""
    return nice_grid_size(power * grid.mode_radius + 1)


def _lp_node_values(traj: Trajectory, idx: np.ndarray, p: float, quad_n: int) -> np.ndarray:
    vol = traj.grid.cell_volume(quad_n)
    out = np.empty(idx.size)
    for row, k in enumerate(idx):
        s = inverse_transform(traj.field(k), quad_n)
        out[row] = np.sum(np.abs(s) ** p) * vol
    return out


def spacetime_lp(traj: Trajectory, p: float, interval: TimeInterval | None = None) -> float:
    """L^p_{t,x} norm over the window, trapezoidal in time.

    The spatial quadrature is exact for even integer p up to the padding
    of the trajectory grid (p = 4 and 6 on default grids); other p are
    plain Riemann-grid approximations.
    """
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    if interval is None:
        interval = traj.interval
    idx = traj.node_indices(interval)
    if idx.size < 2:
        raise ValueError("window contains fewer than two nodes")
    g = _lp_node_values(traj, idx, p, traj.grid.phys_points)
    return float(np.trapezoid(g, traj.times[idx]) ** (1.0 / p))


def _shell_l4_cumulative(traj: Trajectory) -> np.ndarray:
    """U(k) = sum_N N^3 * cumtrapz of integral |P_N u|^4 dx, per node.

    Z-norm window values reduce to differences U(j) - U(i) because the
    dyadic sum is linear in the time integral.  Shell integrands are done
    on a lean grid that is still exact for quartic products.
    """
    grid = traj.grid
    quad_n = min(_quadrature_points(grid, 4), grid.phys_points)
    vol = grid.cell_volume(quad_n)
    shells = dyadic_shells(grid)
    m = traj.node_count
    series = np.zeros((len(shells), m))
    weights = [shell_weight(grid, n) for n in shells]
    for k in range(m):
        f = traj.field(k)
        for si, w in enumerate(weights):
            piece = SpectralField(grid, f.coeffs * w)
            s = inverse_transform(piece, quad_n)
            mag2 = s.real**2 + s.imag**2
            series[si, k] = np.sum(mag2**2) * vol
    n3 = np.array([float(n) ** 3 for n in shells])
    integ = cumulative_trapezoid(series, traj.times, axis=1, initial=0.0)
    return n3 @ integ


def z_norm(traj: Trajectory, interval: TimeInterval | None = None) -> float:
    """Z norm: sup over windows J (|J| <= 1) of (sum_N N^3 ||P_N u||_{L^4(J)}^4)^{1/4}.

    Windows run over pairs of trajectory nodes inside the interval.
    """
    if interval is None:
        interval = traj.interval
    idx = traj.node_indices(interval)
    if idx.size < 2:
        raise ValueError("window contains fewer than two nodes")
    sub = traj.restrict(interval)
    u = _shell_l4_cumulative(sub)
    t = sub.times
    best = 0.0
    lo = 0
    for j in range(1, t.size):
        while t[j] - t[lo] > WINDOW_CAP + TIME_TOL:
            lo += 1
        if lo < j:
            # U is nondecreasing, so the earliest admissible start is optimal.
            best = max(best, u[j] - u[lo])
    return float(max(best, 0.0) ** 0.25)


def discrete_two_variation(values) -> float:
    """Largest (sum of squared increment norms)^{1/2} over subpartitions.

    ``values`` is a sequence of scalars or arrays; increments are measured
    in the flat l^2 norm.  Computed by an O(M^2) dynamic program over
    partition endpoints (increments are nonnegative, so optimal partitions
    may be assumed to start and end at the boundary samples).
    """
    arr = np.stack([np.ravel(np.asarray(v, dtype=np.complex128)) for v in values])
    m = arr.shape[0]
    if m < 2:
        return 0.0
    # increments by direct differencing: the Gram-identity shortcut
    # (|a|^2 + |b|^2 - 2 Re<a,b>) loses the exact cancellation on
    # nearly-constant series, which the free-flow tests rely on
    best = np.zeros(m)
    chunk = 1024
    for j in range(1, m):
        top = -np.inf
        for lo in range(0, j, chunk):
            hi = min(lo + chunk, j)
            diff = arr[lo:hi] - arr[j]
            d2 = np.sum(diff.real**2 + diff.imag**2, axis=1)
            top = max(top, float(np.max(best[lo:hi] + d2)))
        best[j] = top
    return float(np.sqrt(best[-1]))


def _backward_propagated(traj: Trajectory, idx: np.ndarray) -> np.ndarray:
    """(len(idx), mode_count) series of exp(-it Lap) u(t) coefficients."""
    sym = traj.grid.symbol_sq.reshape(-1)
    t = traj.times[idx]
    return traj.flat_coeffs[idx] * np.exp(1j * t[:, None] * sym[None, :])


def v2_delta_proxy(traj: Trajectory, s: float, interval: TimeInterval | None = None) -> float:
    """Two-variation of t -> exp(-it Lap) u(t) in H^s over window nodes."""
    if interval is None:
        interval = traj.interval
    idx = traj.node_indices(interval)
    a = _backward_propagated(traj, idx)
    w = traj.grid.japanese_bracket_sq.reshape(-1) ** float(s)
    return discrete_two_variation(a * np.sqrt(w)[None, :])


def _per_mode_variation_scan(a: np.ndarray, weights: np.ndarray,
                             i_chunk: int = 256) -> np.ndarray:
    """Weighted sum of per-mode squared two-variations, for every prefix.

    ``a`` is (M, modes); returns (M,) with entry j holding
    sum_z weights[z] * twovar^2(a[0..j, z]).  The per-mode dynamic program
    is the same as in :func:`discrete_two_variation`, vectorized over modes.
    """
    m, n_modes = a.shape
    out = np.zeros(m)
    if m < 2:
        return out
    # direct differencing, not the Gram identity: keeps the per-mode
    # increments exactly tiny on nearly-constant (free-flow) series
    best = np.zeros((m, n_modes))
    for j in range(1, m):
        acc = None
        for lo in range(0, j, i_chunk):
            hi = min(lo + i_chunk, j)
            diff = a[lo:hi] - a[j]
            cand = best[lo:hi] + diff.real**2 + diff.imag**2
            cand = cand.max(axis=0)
            acc = cand if acc is None else np.maximum(acc, cand)
        best[j] = acc
        out[j] = float(weights @ acc)
    return out


def y_norm_proxy(traj: Trajectory, s: float, interval: TimeInterval | None = None) -> float:
    """Mode-wise V^2 proxy: (sum_z <z>^{2s} twovar^2(exp(-itLap)u)_z)^{1/2}.

    Unit frequency cubes centered on lattice points contain single modes,
    so the cube projections reduce to the per-mode coefficient series.
    """
    if interval is None:
        interval = traj.interval
    idx = traj.node_indices(interval)
    a = _backward_propagated(traj, idx)
    w = traj.grid.japanese_bracket_sq.reshape(-1) ** float(s)
    scan = _per_mode_variation_scan(a, w)
    return float(np.sqrt(scan[-1]))


def x1_proxy_and_zprime(traj: Trajectory, interval: TimeInterval | None = None) -> tuple[float, float]:
    """(x1, zprime) with x1 = max(sup-grid H^1, y_norm_proxy at s = 1) and
    zprime = sqrt(z_norm * x1)."""
    if interval is None:
        interval = traj.interval
    idx = traj.node_indices(interval)
    sup_h1 = float(np.max(traj.h1_series[idx]))
    x1 = max(sup_h1, y_norm_proxy(traj, 1.0, interval))
    z = z_norm(traj, interval)
    return x1, float(np.sqrt(z * x1))


def _zprime_scan_state(traj: Trajectory):
    """Per-node data shared by every zprime prefix scan of a trajectory.

    Returns (times, shell cumulative, H^1 series, backward-propagated flat
    coefficients, bracket weights); differences of the cumulative are the
    same whether it starts at the trajectory head or mid-way, so one state
    serves scans from any start node.
    """
    a = _backward_propagated(traj, np.arange(traj.node_count))
    w = traj.grid.japanese_bracket_sq.reshape(-1)
    return traj.times, _shell_l4_cumulative(traj), traj.h1_series, a, w


def zprime_prefix_values(traj: Trajectory, start: int = 0, stop_above: float | None = None,
                         _state=None) -> np.ndarray:
    """zprime over prefixes [t_start, t_j], j = start..end, computed incrementally.

    Entry 0 (the single-node prefix) is 0 by convention.  If ``stop_above``
    is given, the scan aborts once the value exceeds it and the returned
    array is truncated after the first offending entry.
    """
    if _state is None:
        _state = _zprime_scan_state(traj)
    t_all, u_all, h1_all, a_all, w = _state
    t = t_all[start:]
    u = u_all[start:]
    h1 = h1_all[start:]
    a = a_all[start:]
    m = t.size
    out = np.zeros(m)
    if m < 2:
        return out

    p = a.real**2 + a.imag**2
    base = np.zeros((m, a.shape[1]))
    base[0] = p[0]
    z4 = 0.0
    lo = 0
    sup_h1 = h1[0]
    for j in range(1, m):
        while t[j] - t[lo] > WINDOW_CAP + TIME_TOL:
            lo += 1
        if lo < j:
            z4 = max(z4, u[j] - u[lo])
        sup_h1 = max(sup_h1, h1[j])
        acc = None
        for ci in range(0, j, 256):
            cj = min(ci + 256, j)
            cand = base[ci:cj] - 2.0 * (a[ci:cj].real * a[j].real + a[ci:cj].imag * a[j].imag)
            cand = cand.max(axis=0)
            acc = cand if acc is None else np.maximum(acc, cand)
        best = np.maximum(acc + p[j], 0.0)
        base[j] = best + p[j]
        y_sq = float(w @ best)
        x1 = max(sup_h1, np.sqrt(y_sq))
        out[j] = float(np.sqrt((max(z4, 0.0) ** 0.25) * x1))
        if stop_above is not None and out[j] > stop_above:
            return out[: j + 1]
    return out


@dataclass(frozen=True)
class NormReport:
    """Fixed-name bundle of trajectory diagnostics over one interval."""

    t_start: float
    t_end: float
    mass: float
    energy: float
    kinetic: float
    h1: float
    linf_h1: float
    z_norm: float
    x1_proxy: float
    zprime_proxy: float
    y1_proxy: float

    FIELD_NAMES = (
        "t_start", "t_end", "mass", "energy", "kinetic", "h1",
        "linf_h1", "z_norm", "x1_proxy", "zprime_proxy", "y1_proxy",
    )

    def __post_init__(self):
        for name in self.FIELD_NAMES:
            object.__setattr__(self, name, float(getattr(self, name)))

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELD_NAMES)

    def to_csv(self) -> str:
        header = ",".join(self.FIELD_NAMES)
        row = ",".join(repr(v) for v in self.values())
        return f"{header}\n{row}\n"

    @classmethod
    def from_csv(cls, text: str) -> "NormReport":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if len(lines) != 2 or lines[0].split(",") != list(cls.FIELD_NAMES):
            raise ValueError("not a NormReport CSV")
        vals = [float(tok) for tok in lines[1].split(",")]
        return cls(*vals)

    def to_json(self) -> str:
        return json.dumps({name: getattr(self, name) for name in self.FIELD_NAMES},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NormReport":
        data = json.loads(text)
        return cls(**{name: data[name] for name in cls.FIELD_NAMES})


def compute_norm_report(traj: Trajectory, interval: TimeInterval | None = None) -> NormReport:
    """Measure a trajectory: pointwise quantities at the window's first node,
    sup and space-time quantities over the window."""
    if interval is None:
        interval = traj.interval
    idx = traj.node_indices(interval)
    first = traj.field(idx[0])
    sup_h1 = float(np.max(traj.h1_series[idx]))
    zp = z = y1 = 0.0
    x1 = sup_h1
    if idx.size >= 2:
        z = z_norm(traj, interval)
        y1 = y_norm_proxy(traj, 1.0, interval)
        x1 = max(sup_h1, y1)
        zp = float(np.sqrt(z * x1))
    return NormReport(
        t_start=traj.times[idx[0]],
        t_end=traj.times[idx[-1]],
        mass=mass(first),
        energy=energy(first, traj.params),
        kinetic=apply_gradient_square(first),
        h1=sobolev_norm(first, 1.0),
        linf_h1=sup_h1,
        z_norm=z,
        x1_proxy=x1,
        zprime_proxy=zp,
        y1_proxy=y1,
    )
