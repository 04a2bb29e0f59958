"""Perturbative global solver: cubic correction on top of a quintic reference.

Over each outer window J (|J| <= eta_tilde) the driver re-solves the
defocusing quintic equation from the current state, partitions J into
inner intervals where the reference's Z'-proxy stays below eta, and
Picard-solves the difference equation

    (i d_t + Lap) w = mu1 |v+w|^2 (v+w) + |v+w|^4 (v+w) - |v|^4 v

piece by piece, carrying w(t_j) forward.  The reconstruction is u = v + w.
A ledger records, per inner interval, the measured size of w against the
inductive budget (2C)^j |J|^{1/20} with a calibrated constant C; a failed
contraction in any inner solve halves eta_tilde and retries the window.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .evolution import (
    NoContractionError,
    SolverConfig,
    duhamel_fixed_point,
    evolve,
    partition_by_zprime,
    _batched_inverse,
)
from .norms import (
    TIME_TOL,
    NormReport,
    TimeInterval,
    Trajectory,
    compute_norm_report,
    x1_proxy_and_zprime,
)
from .spectral import EquationParams, SpectralField, zero_field

QUINTIC_PARAMS = EquationParams(0.0, 1.0)
BUDGET_EXPONENT = 1.0 / 20.0


@dataclass(frozen=True)
class GwpConfig:
    """Driver knobs: solver, smallness thresholds, budget constant.

    eta bounds the reference's Z'-proxy per inner interval; eta_tilde
    bounds the outer window length (halved on contraction failures, at
    most max_retries times); budget_c is the frozen constant C of the
    ledger budget and must exceed 1/2 so budgets grow with j.
    """

    solver: SolverConfig
    eta: float = 0.3
    eta_tilde: float = 0.25
    budget_c: float = 2.0
    max_retries: int = 6

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not (0 < self.eta_tilde <= 1.0):
            raise ValueError("eta_tilde must lie in (0, 1]")
        if self.budget_c <= 0.5:
            raise ValueError("budget_c must exceed 1/2 for increasing budgets")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class GwpLedgerRow:
    """One inner interval: measured w size against the inductive budget."""

    window: int
    j: int
    t_start: float
    t_end: float
    zprime_v: float
    w_measure: float
    budget: float
    passed: bool


_ROW_COLUMNS = ("window", "j", "t_start", "t_end", "zprime_v", "w_measure", "budget", "passed")


@dataclass(frozen=True)
class GwpLedger:
    """Run-level record: constants used plus one row per inner interval.

    eta_tilde is the final working value; `retries` counts how many times
    it was halved from its configured start.
    """

    budget_c: float
    eta: float
    eta_tilde: float
    retries: int
    rows: tuple[GwpLedgerRow, ...]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        lines = [
            f"# budget_c={self.budget_c!r}",
            f"# eta={self.eta!r}",
            f"# eta_tilde={self.eta_tilde!r}",
            f"# retries={self.retries!r}",
            ",".join(_ROW_COLUMNS),
        ]
        for r in self.rows:
            lines.append(",".join([
                repr(r.window), repr(r.j), repr(r.t_start), repr(r.t_end),
                repr(r.zprime_v), repr(r.w_measure), repr(r.budget),
                "true" if r.passed else "false",
            ]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "GwpLedger":
        meta: dict[str, str] = {}
        rows: list[GwpLedgerRow] = []
        header_seen = False
        for line in text.strip().splitlines():
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line.split(",") != list(_ROW_COLUMNS):
                    raise ValueError("not a GwpLedger CSV")
                header_seen = True
                continue
            tok = line.split(",")
            rows.append(GwpLedgerRow(
                window=int(tok[0]), j=int(tok[1]),
                t_start=float(tok[2]), t_end=float(tok[3]),
                zprime_v=float(tok[4]), w_measure=float(tok[5]),
                budget=float(tok[6]), passed=tok[7] == "true",
            ))
        return cls(
            budget_c=float(meta["budget_c"]),
            eta=float(meta["eta"]),
            eta_tilde=float(meta["eta_tilde"]),
            retries=int(meta["retries"]),
            rows=tuple(rows),
        )

    def to_json(self) -> str:
        windows: dict[int, list[GwpLedgerRow]] = {}
        for r in self.rows:
            windows.setdefault(r.window, []).append(r)
        payload = {
            "budget_c": self.budget_c,
            "eta": self.eta,
            "eta_tilde": self.eta_tilde,
            "retries": self.retries,
            "windows": [
                {
                    "window": w,
                    "pieces": [
                        {
                            "j": r.j, "t_start": r.t_start, "t_end": r.t_end,
                            "zprime_v": r.zprime_v, "w_measure": r.w_measure,
                            "budget": r.budget, "passed": r.passed,
                        }
                        for r in rows
                    ],
                }
                for w, rows in sorted(windows.items())
            ],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GwpLedger":
        data = json.loads(text)
        rows = [
            GwpLedgerRow(window=w["window"], j=p["j"], t_start=p["t_start"],
                         t_end=p["t_end"], zprime_v=p["zprime_v"],
                         w_measure=p["w_measure"], budget=p["budget"],
                         passed=p["passed"])
            for w in data["windows"] for p in w["pieces"]
        ]
        rows.sort(key=lambda r: (r.window, r.j))
        return cls(budget_c=data["budget_c"], eta=data["eta"],
                   eta_tilde=data["eta_tilde"], retries=data["retries"],
                   rows=tuple(rows))


def solve_quintic_reference(v0: SpectralField, interval: TimeInterval,
                            config: SolverConfig) -> tuple[Trajectory, NormReport]:
    """Defocusing quintic solve (mu1 = 0, mu2 = 1) with its diagnostics.

    The report stands in for the a-priori space-time bounds of the
    reference solution.  Needs |I| <= 1.
    """
    if interval.length > 1.0 + TIME_TOL:
        raise ValueError(f"reference solve needs |I| <= 1, got {interval.length}")
    traj = evolve(v0, interval, QUINTIC_PARAMS, config)
    return traj, compute_norm_report(traj)


def _difference_pointwise(grid, v_stack: np.ndarray, mu1: float, n: int):
    def apply(sl, w_samples):
        v_s = _batched_inverse(grid, v_stack[sl], n)
        s = v_s + w_samples
        mag2 = s.real**2 + s.imag**2
        vmag2 = v_s.real**2 + v_s.imag**2
        return (mu1 * mag2 + mag2**2) * s - vmag2**2 * v_s
    return apply


def solve_difference_equation(v: Trajectory, interval: TimeInterval, mu1: float,
                              config: SolverConfig,
                              w_start: SpectralField | None = None) -> Trajectory:
    """Picard-solve the difference equation against a stored reference v.

    The correction w is sampled on v's nodes restricted to the interval;
    by default w starts from zero (the driver passes the carried state).
    A sweep budget exhausted before reaching tolerance is treated the same
    as a failed contraction: the window must shrink.
    """
    sub = v.restrict(interval)
    if sub.node_count < 2:
        raise ValueError("difference solve needs at least two reference nodes")
    grid = sub.grid
    w0 = zero_field(grid) if w_start is None else w_start
    pointwise = _difference_pointwise(grid, sub.coeffs, float(mu1), grid.phys_points)
    stack, iterations, residuals, ratios, converged = duhamel_fixed_point(
        grid, sub.times, w0, pointwise, config)
    if not converged:
        raise NoContractionError(
            f"difference solve stalled at residual {residuals[-1]:.3e} "
            f"after {iterations} sweeps",
            residuals=residuals, ratios=ratios,
        )
    return Trajectory(grid, EquationParams(float(mu1), 1.0), sub.times, stack)


def run_gwp_scheme(u0: SpectralField, interval: TimeInterval, mu1: float,
                   config: GwpConfig) -> tuple[Trajectory, GwpLedger]:
    """March the perturbation scheme across the interval.

    Quintic coefficient is fixed to 1 (the driver's normalization); mu1 may
    take either sign.  Returns the reconstructed trajectory u = v + w and
    the budget ledger.  Raises BlowUpSuspected / PartitionInfeasibleError
    from the inner machinery, and NoContractionError only once eta_tilde
    halving is exhausted.
    """
    grid = u0.grid
    mu1 = float(mu1)
    eta_t = config.eta_tilde
    retries = 0
    rows: list[GwpLedgerRow] = []
    times_parts: list[np.ndarray] = []
    stack_parts: list[np.ndarray] = []
    u_a = u0
    a = interval.start
    window_index = 0
    j_counter = 0
    while interval.end - a > TIME_TOL:
        window = TimeInterval(a, min(a + eta_t, interval.end))
        try:
            w_times, w_stack, w_rows = _run_window(
                u_a, window, mu1, config, window_index, j_counter)
        except NoContractionError:
            retries += 1
            if retries > config.max_retries:
                raise
            eta_t *= 0.5
            continue
        rows.extend(w_rows)
        j_counter += len(w_rows)
        if times_parts:
            # window start duplicates the previous window's final node
            w_times = w_times[1:]
            w_stack = w_stack[1:]
        times_parts.append(w_times)
        stack_parts.append(w_stack)
        u_a = SpectralField(grid, stack_parts[-1][-1])
        a = window.end
        window_index += 1
    traj = Trajectory(
        grid, EquationParams(mu1, 1.0),
        np.concatenate(times_parts), np.concatenate(stack_parts),
    )
    ledger = GwpLedger(budget_c=config.budget_c, eta=config.eta,
                       eta_tilde=eta_t, retries=retries, rows=tuple(rows))
    return traj, ledger


def _run_window(u_a: SpectralField, window: TimeInterval, mu1: float,
                config: GwpConfig, window_index: int, j_start: int):
    """One outer window: reference, partition, difference solves, rows."""
    v_traj = evolve(u_a, window, QUINTIC_PARAMS, config.solver)
    pieces = partition_by_zprime(v_traj, window, config.eta)
    w_field = zero_field(u_a.grid)
    rows: list[GwpLedgerRow] = []
    w_parts: list[np.ndarray] = []
    j = j_start
    scale = window.length ** BUDGET_EXPONENT
    for piece in pieces:
        w_traj = solve_difference_equation(v_traj, piece, mu1, config.solver,
                                           w_start=w_field)
        x1_w, _ = x1_proxy_and_zprime(w_traj)
        w_measure = max(float(np.max(w_traj.h1_series)), x1_w)
        _, zp_v = x1_proxy_and_zprime(v_traj, piece)
        budget = (2.0 * config.budget_c) ** j * scale
        rows.append(GwpLedgerRow(
            window=window_index, j=j, t_start=piece.start, t_end=piece.end,
            zprime_v=zp_v, w_measure=w_measure, budget=budget,
            passed=w_measure <= budget,
        ))
        part = w_traj.coeffs
        if w_parts:
            part = part[1:]  # piece start equals the carried node
        w_parts.append(part)
        w_field = w_traj.field(w_traj.node_count - 1)
        j += 1
    w_stack = np.concatenate(w_parts)
    u_stack = v_traj.coeffs + w_stack
    return v_traj.times.copy(), u_stack, rows
