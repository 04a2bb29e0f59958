"""Time integration: Strang splitting and Duhamel fixed-point iteration.

The splitting step treats the nonlinearity exactly in physical space:

    N_tau : u -> u * exp(-i tau (mu1 |u|^2 + mu2 |u|^4)),

a pointwise phase rotation, composed as N_{dt/2} o L_{dt} o N_{dt/2} with
the exact free flow L.  Both substeps are isometries of the padded state,
so mass is conserved to roundoff as long as the solution stays spectrally
resolved inside the retained lattice (the final truncation is the only
lossy element, and it is inert for resolved data).

The Picard path iterates the Duhamel map

    Phi(u)(t) = e^{i(t-a) Lap} u(a) - i int_a^t e^{i(t-s) Lap} F(u(s)) ds

with trapezoidal quadrature in the interaction picture: the integrand is
stored as w(s) = e^{-i(s-a) Lap} F(u(s)), integrated cumulatively, and
propagated back.  Contraction is monitored empirically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.fft as _fft
from scipy.integrate import cumulative_trapezoid

from .norms import (
    TIME_TOL,
    TimeInterval,
    Trajectory,
    _zprime_scan_state,
    energy,
    x1_proxy_and_zprime,
    zprime_prefix_values,
)
from .spectral import (
    ConfigurationError,
    EquationParams,
    SpectralField,
    TorusGrid,
    fft_workers,
    forward_transform,
    inverse_transform,
)

_STACK_CHUNK = 16  # nodes per batched FFT when evaluating nonlinearities


class BlowUpSuspected(RuntimeError):
    """Integration aborted: non-finite state or H^1 above the ceiling."""

    def __init__(self, message: str, last_valid_time: float, trajectory: Trajectory | None = None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
        self.trajectory = trajectory


class NoContractionError(RuntimeError):
    """Duhamel iteration failed to contract for three consecutive sweeps."""

    def __init__(self, message: str, residuals=None, ratios=None):
        super().__init__(message)
        self.residuals = list(residuals or [])
        self.ratios = list(ratios or [])


class PartitionInfeasibleError(RuntimeError):
    """A single time step already exceeds the smallness threshold."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the integrators.

    dt: step of the sampling grid (last step of an interval is shortened).
    picard_max_iters / picard_tol: Duhamel sweep budget and the sup-grid
        H^1 residual target.
    smallness_delta: Z'-proxy budget used to flag when local-theory
        smallness fails for the free evolution of the data.
    contraction_checks: record empirical contraction ratios and abort on
        three consecutive non-contracting sweeps.
    h1_ceiling: abort threshold for H^1 growth during split-stepping.
    record_energies: measure E(u) at every node while evolving.
    """

    dt: float
    picard_max_iters: int = 30
    picard_tol: float = 1e-10
    smallness_delta: float = 0.5
    contraction_checks: bool = True
    h1_ceiling: float = 1e6
    record_energies: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be >= 1")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.smallness_delta <= 0:
            raise ValueError("smallness_delta must be positive")
        if self.h1_ceiling <= 0:
            raise ValueError("h1_ceiling must be positive")


def time_grid(interval: TimeInterval, dt: float) -> np.ndarray:
    """Nodes a, a+dt, ..., b with the last step shortened to land on b."""
    n_steps = max(1, math.ceil(interval.length / dt - 1e-12))
    times = interval.start + dt * np.arange(n_steps + 1)
    times[-1] = interval.end
    if times[-1] - times[-2] <= TIME_TOL * max(1.0, abs(interval.end)):
        times = np.delete(times, -2)
    return times


def _phase_rotation(samples: np.ndarray, tau: float, params: EquationParams) -> np.ndarray:
    mag2 = samples.real**2 + samples.imag**2
    return samples * np.exp(-1j * tau * (params.mu1 * mag2 + params.mu2 * mag2**2))


def strang_step(field: SpectralField, dt: float, params: EquationParams) -> SpectralField:
    """One step of N_{dt/2} o L_{dt} o N_{dt/2}.

    The phase rotations are evaluated pointwise on the padded grid, the
    free flow acts diagonally in coefficient space.
    """
    grid = field.grid
    if not grid.has_quintic_padding:
        raise ConfigurationError("strang_step needs the quintic padding on the grid")
    half = 0.5 * dt
    s = inverse_transform(field)
    s = _phase_rotation(s, half, params)
    f = forward_transform(grid, s)
    f = SpectralField(grid, f.coeffs * np.exp(-1j * dt * grid.symbol_sq))
    s = inverse_transform(f)
    s = _phase_rotation(s, half, params)
    return forward_transform(grid, s)


def _check_state(coeffs: np.ndarray, h1_sq_weights: np.ndarray, ceiling: float) -> float:
    """Return the H^1 norm, or raise on non-finite / runaway states."""
    if not np.isfinite(coeffs.view(np.float64) if coeffs.flags.c_contiguous else coeffs).all():
        raise FloatingPointError("non-finite coefficient")
    h1 = float(np.sqrt(np.sum(h1_sq_weights * (coeffs.real**2 + coeffs.imag**2))))
    if h1 > ceiling:
        raise FloatingPointError(f"H^1 norm {h1:.3e} above ceiling {ceiling:.3e}")
    return h1


def evolve(u0: SpectralField, interval: TimeInterval, params: EquationParams,
           config: SolverConfig) -> Trajectory:
    """Split-step the equation over the interval, sampling every dt.

    Raises BlowUpSuspected (carrying the last valid time and the partial
    trajectory) if the state leaves the finite / below-ceiling regime.
    """
    grid = u0.grid
    times = time_grid(interval, config.dt)
    m = times.size
    stack = np.empty((m, *grid.lattice_shape), dtype=np.complex128)
    stack[0] = u0.coeffs
    energies = np.empty(m) if config.record_energies else None
    if energies is not None:
        energies[0] = energy(u0, params)
    bracket = grid.japanese_bracket_sq
    current = u0
    for k in range(1, m):
        dt_k = times[k] - times[k - 1]
        try:
            # SpectralField construction rejects non-finite states, so the
            # step itself can raise; both signals mean the same thing here.
            current = strang_step(current, dt_k, params)
            _check_state(current.coeffs, bracket, config.h1_ceiling)
        except (FloatingPointError, ValueError) as exc:
            partial = Trajectory(grid, params, times[:k], stack[:k],
                                 None if energies is None else energies[:k])
            raise BlowUpSuspected(
                f"blow-up suspected at t = {times[k]:.6g}: {exc}",
                last_valid_time=float(times[k - 1]),
                trajectory=partial,
            ) from exc
        stack[k] = current.coeffs
        if energies is not None:
            energies[k] = energy(current, params)
    return Trajectory(grid, params, times, stack, energies)


def _batched_inverse(grid: TorusGrid, stack: np.ndarray, n: int) -> np.ndarray:
    idx = grid.modes % n
    buf = np.zeros((stack.shape[0], n, n, n), dtype=np.complex128)
    buf[(slice(None), *np.ix_(idx, idx, idx))] = stack
    return _fft.ifftn(buf, axes=(1, 2, 3), workers=fft_workers()) * (n**3 / (2.0 * np.pi) ** 1.5)


def _batched_forward(grid: TorusGrid, samples: np.ndarray) -> np.ndarray:
    n = samples.shape[-1]
    idx = grid.modes % n
    spec = _fft.fftn(samples, axes=(1, 2, 3), workers=fft_workers())
    return spec[(slice(None), *np.ix_(idx, idx, idx))] * ((2.0 * np.pi) ** 1.5 / n**3)


def _nonlinearity_on_stack(grid: TorusGrid, stack: np.ndarray, pointwise) -> np.ndarray:
    """Apply a pointwise physical-space map to every node, dealiased.

    ``pointwise(node_slice, samples)`` receives the chunk's node range so
    callers can fold in frozen companion data (the reference solution in
    the difference equation).
    """
    if not grid.has_quintic_padding:
        raise ConfigurationError("nonlinear evaluation needs the quintic padding")
    n = grid.phys_points
    out = np.empty_like(stack)
    for lo in range(0, stack.shape[0], _STACK_CHUNK):
        sl = slice(lo, min(lo + _STACK_CHUNK, stack.shape[0]))
        samples = _batched_inverse(grid, stack[sl], n)
        out[sl] = _batched_forward(grid, pointwise(sl, samples))
    return out


def cqnls_pointwise(params: EquationParams):
    def apply(_sl, samples):
        mag2 = samples.real**2 + samples.imag**2
        return (params.mu1 * mag2 + params.mu2 * mag2**2) * samples
    return apply


def duhamel_fixed_point(grid: TorusGrid, times: np.ndarray, initial: SpectralField,
                        rhs_pointwise, config: SolverConfig):
    """Iterate the Duhamel map on the sampling grid.

    Returns (stack, iterations, residuals, ratios, converged).  Residuals
    are sup-grid H^1 distances between consecutive iterates; with
    contraction checks on, three consecutive ratios >= 1 abort with
    NoContractionError.
    """
    tau = times - times[0]
    sym = grid.symbol_sq
    fwd = np.exp(-1j * tau[:, None, None, None] * sym[None])
    u0 = initial.coeffs[None]
    # same operand order as the update below, so a vanishing integral
    # reproduces the free iterate bitwise
    iterate = fwd * (u0 - 1j * np.zeros_like(fwd))
    bracket = grid.japanese_bracket_sq
    residuals: list[float] = []
    ratios: list[float] = []
    converged = False
    non_contracting = 0
    iterations = 0
    for _ in range(config.picard_max_iters):
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = _nonlinearity_on_stack(grid, iterate, rhs_pointwise)
            w = rhs / fwd  # e^{+i tau |xi|^2} rhs: interaction picture
            integral = cumulative_trapezoid(w, tau, axis=0, initial=0.0)
            new = fwd * (u0 - 1j * integral)
            iterations += 1
            diff = new - iterate
            node_h1 = np.sqrt(np.sum(bracket[None] * (diff.real**2 + diff.imag**2), axis=(1, 2, 3)))
        residual = float(np.max(node_h1))
        if not np.isfinite(residual):
            # overflow is unambiguous divergence; NaN ratios must not
            # slip past the >= 1 comparison below
            ratios.append(math.inf)
            residuals.append(residual)
            raise NoContractionError(
                f"iteration diverged (non-finite residual) after {iterations} sweeps",
                residuals=residuals, ratios=ratios,
            )
        if residuals and config.contraction_checks:
            prev = residuals[-1]
            ratio = math.inf if prev == 0.0 else residual / prev
            ratios.append(ratio)
            non_contracting = non_contracting + 1 if ratio >= 1.0 else 0
        residuals.append(residual)
        iterate = new
        if residual <= config.picard_tol:
            converged = True
            break
        if non_contracting >= 3:
            raise NoContractionError(
                f"no contraction: residual ratios {ratios[-3:]} after {iterations} sweeps",
                residuals=residuals, ratios=ratios,
            )
    return iterate, iterations, residuals, ratios, converged


@dataclass(frozen=True)
class PicardResult:
    trajectory: Trajectory
    iterations: int
    residuals: tuple[float, ...]
    contraction_ratios: tuple[float, ...]
    converged: bool
    free_zprime: float
    smallness_satisfied: bool


def picard_solve(u0: SpectralField, interval: TimeInterval, params: EquationParams,
                 config: SolverConfig) -> PicardResult:
    """Duhamel fixed-point solve on [a, b] with |b - a| <= 1.

    The first iterate is the free evolution of the data; the report also
    records the Z'-proxy of that free evolution against smallness_delta.
    """
    if interval.length > 1.0 + TIME_TOL:
        raise ValueError(f"picard_solve needs |I| <= 1, got {interval.length}")
    grid = u0.grid
    times = time_grid(interval, config.dt)
    stack, iterations, residuals, ratios, converged = duhamel_fixed_point(
        grid, times, u0, cqnls_pointwise(params), config)
    traj = Trajectory(grid, params, times, stack)

    tau = times - times[0]
    free = u0.coeffs[None] * np.exp(-1j * tau[:, None, None, None] * grid.symbol_sq[None])
    free_traj = Trajectory(grid, params, times, free)
    _, free_zp = x1_proxy_and_zprime(free_traj)
    return PicardResult(
        trajectory=traj,
        iterations=iterations,
        residuals=tuple(residuals),
        contraction_ratios=tuple(ratios),
        converged=converged,
        free_zprime=free_zp,
        smallness_satisfied=free_zp <= config.smallness_delta,
    )


def partition_by_zprime(v: Trajectory, interval: TimeInterval, eta: float) -> list[TimeInterval]:
    """Greedy maximal partition of the interval into windows with
    zprime_proxy(v, window) <= eta.

    Windows are consecutive, share endpoints, and each is the longest
    node-aligned prefix that fits the budget.  If a single time step
    already exceeds eta the partition is infeasible.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    sub = v.restrict(interval)
    t = sub.times
    m = t.size
    if m < 2:
        raise ValueError("cannot partition an interval with fewer than two nodes")
    pieces: list[TimeInterval] = []
    state = _zprime_scan_state(sub)
    start = 0
    while start < m - 1:
        vals = zprime_prefix_values(sub, start, stop_above=eta, _state=state)
        last = vals.size - 1
        exceeded = vals[last] > eta
        if exceeded:
            if last == 1:
                raise PartitionInfeasibleError(
                    f"zprime {vals[last]:.3e} > eta {eta:.3e} over the single step "
                    f"ending at t = {t[start + 1]:.6g}",
                    time=float(t[start + 1]),
                )
            end = start + last - 1
        else:
            end = start + last
        pieces.append(TimeInterval(t[start], t[end]))
        if not exceeded:
            break
        start = end
    return pieces
