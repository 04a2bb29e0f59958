"""Run configuration: INI-style sections parsed into typed dataclasses.

The format is deliberately small: `[section]` headers, `key = value`
pairs, blank lines, and full-line comments starting with `#` or `;`.
Parsing reports the first problem with its line number and one of three
distinct error classes: unknown section or key, value of the wrong type,
or a value combination violating a module invariant.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .evolution import SolverConfig
from .gwp import GwpConfig
from .norms import TimeInterval
from .probes import ProbeConfig
from .spectral import ConfigurationError, EquationParams, TorusGrid

COMMANDS = (
    "evolve", "picard", "gwp", "norms",
    "probe-strichartz", "probe-bilinear", "probe-trilinear",
)
FORMATS = ("csv", "json")
INITIAL_KINDS = ("random", "constant", "plane_wave", "checkpoint")


class ConfigParseError(ValueError):
    """Base parse failure; `line` is 1-based, 0 when no line applies."""

    def __init__(self, message: str, line: int = 0):
        prefix = f"line {line}: " if line else ""
        super().__init__(prefix + message)
        self.line = line


class UnknownKeyError(ConfigParseError):
    pass


class TypeMismatchError(ConfigParseError):
    pass


class InvariantViolationError(ConfigParseError):
    pass


@dataclass(frozen=True)
class InitialSpec:
    """How to construct the initial field (or where to load it from)."""

    kind: str = "random"
    amplitude: float = 0.5
    h1_norm: float = 1.0
    support_radius: int = 1
    mode: tuple[int, int, int] = (1, 0, 0)
    checkpoint: str = ""


@dataclass(frozen=True)
class ProbeShells:
    """Shell arguments for the bilinear/trilinear probe commands."""

    n1: int = 16
    n2: int = 2
    n3: int = 1
    n1_values: tuple[int, ...] = (4, 8, 16, 32)
    n2_values: tuple[int, ...] = (2, 4, 8, 16)


@dataclass(frozen=True)
class RunConfig:
    command: str = "norms"
    seed: int = 0
    out_format: str = "csv"
    grid: TorusGrid = field(default_factory=lambda: TorusGrid(4))
    params: EquationParams = field(default_factory=lambda: EquationParams(-1.0, 1.0))
    initial: InitialSpec = field(default_factory=InitialSpec)
    interval: TimeInterval = field(default_factory=lambda: TimeInterval(0.0, 1.0))
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(dt=1e-3))
    gwp: GwpConfig = field(default_factory=lambda: GwpConfig(solver=SolverConfig(dt=1e-3)))
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    shells: ProbeShells = field(default_factory=ProbeShells)


def _to_int(tok: str) -> int:
    return int(tok)


def _to_float(tok: str) -> float:
    return float(tok)


def _to_bool(tok: str) -> bool:
    low = tok.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {tok!r}")


def _to_str(tok: str) -> str:
    return tok


def _to_ints(tok: str) -> tuple[int, ...]:
    parts = tok.replace(",", " ").split()
    if not parts:
        raise ValueError("expected at least one integer")
    return tuple(int(p) for p in parts)


def _to_floats(tok: str) -> tuple[float, ...]:
    parts = tok.replace(",", " ").split()
    if not parts:
        raise ValueError("expected at least one number")
    return tuple(float(p) for p in parts)


def _to_seed(tok: str) -> int:
    value = int(tok)
    if not (0 <= value < 2**64):
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return value


def _enum(options):
    def convert(tok: str):
        if tok not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {tok!r}")
        return tok
    return convert


_SCHEMA: dict[str, dict[str, object]] = {
    "run": {
        "command": _enum(COMMANDS),
        "seed": _to_seed,
        "format": _enum(FORMATS),
    },
    "grid": {
        "mode_radius": _to_int,
        "phys_points": _to_int,
        "theta": _to_floats,
    },
    "equation": {
        "mu1": _to_float,
        "mu2": _to_float,
    },
    "initial": {
        "kind": _enum(INITIAL_KINDS),
        "amplitude": _to_float,
        "h1_norm": _to_float,
        "support_radius": _to_int,
        "mode": _to_ints,
        "checkpoint": _to_str,
    },
    "time": {
        "t_start": _to_float,
        "t_end": _to_float,
    },
    "solver": {
        "dt": _to_float,
        "picard_max_iters": _to_int,
        "picard_tol": _to_float,
        "smallness_delta": _to_float,
        "contraction_checks": _to_bool,
        "h1_ceiling": _to_float,
        "record_energies": _to_bool,
    },
    "gwp": {
        "eta": _to_float,
        "eta_tilde": _to_float,
        "budget_c": _to_float,
        "max_retries": _to_int,
    },
    "probe": {
        "sample_count": _to_int,
        "n_values": _to_ints,
        "p": _to_float,
        "interval_length": _to_float,
        "time_nodes": _to_int,
        "mode_radius_cap": _to_int,
        "kappa": _to_float,
        "delta": _to_float,
        "n1": _to_int,
        "n2": _to_int,
        "n3": _to_int,
        "n1_values": _to_ints,
        "n2_values": _to_ints,
    },
}


def parse_config(text: str) -> RunConfig:
    """Parse config text, reporting the first problem with its line number."""
    values: dict[tuple[str, str], object] = {}
    lines: dict[tuple[str, str], int] = {}
    section = None
    section_lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise UnknownKeyError(f"unknown section [{section}]", lineno)
            section_lines.setdefault(section, lineno)
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigParseError("key before any [section] header", lineno)
        key, _, tok = line.partition("=")
        key = key.strip()
        tok = tok.strip()
        schema = _SCHEMA[section]
        if key not in schema:
            raise UnknownKeyError(f"unknown key {key!r} in section [{section}]", lineno)
        try:
            values[(section, key)] = schema[key](tok)
        except ValueError as exc:
            raise TypeMismatchError(f"key {key!r}: {exc}", lineno) from exc
        lines[(section, key)] = lineno
    return _assemble(values, lines, section_lines)


def _section_line(section: str, lines, section_lines) -> int:
    for (sec, _key), ln in lines.items():
        if sec == section:
            return ln
    return section_lines.get(section, 0)


def _assemble(values, lines, section_lines) -> RunConfig:
    def get(section, key, default):
        return values.get((section, key), default)

    def line_of(section, key):
        return lines.get((section, key), _section_line(section, lines, section_lines))

    def build(section, ctor, kwargs):
        try:
            return ctor(**kwargs)
        except (ConfigurationError, ValueError) as exc:
            raise InvariantViolationError(
                f"section [{section}]: {exc}",
                _section_line(section, lines, section_lines),
            ) from exc

    command = get("run", "command", "norms")
    seed = get("run", "seed", 0)
    out_format = get("run", "format", "csv")

    grid = build("grid", TorusGrid, dict(
        mode_radius=get("grid", "mode_radius", 4),
        phys_points=get("grid", "phys_points", None),
        theta=get("grid", "theta", (1.0, 1.0, 1.0)),
    ))
    params = build("equation", EquationParams, dict(
        mu1=get("equation", "mu1", -1.0),
        mu2=get("equation", "mu2", 1.0),
    ))
    if command == "gwp" and params.mu2 != 1.0:
        raise InvariantViolationError(
            f"gwp requires the quintic coefficient mu2 = 1, got mu2 = {params.mu2}",
            line_of("equation", "mu2"),
        )

    mode = get("initial", "mode", (1, 0, 0))
    if len(mode) != 3:
        raise TypeMismatchError("initial mode needs exactly three integers",
                                line_of("initial", "mode"))
    initial = InitialSpec(
        kind=get("initial", "kind", "random"),
        amplitude=get("initial", "amplitude", 0.5),
        h1_norm=get("initial", "h1_norm", 1.0),
        support_radius=get("initial", "support_radius", 1),
        mode=tuple(mode),
        checkpoint=get("initial", "checkpoint", ""),
    )
    if initial.kind == "checkpoint" and not initial.checkpoint:
        raise InvariantViolationError(
            "initial kind 'checkpoint' needs a checkpoint path",
            _section_line("initial", lines, section_lines),
        )

    try:
        interval = TimeInterval(get("time", "t_start", 0.0), get("time", "t_end", 1.0))
    except ValueError as exc:
        raise InvariantViolationError(
            f"section [time]: {exc}", _section_line("time", lines, section_lines)
        ) from exc

    solver = build("solver", SolverConfig, dict(
        dt=get("solver", "dt", 1e-3),
        picard_max_iters=get("solver", "picard_max_iters", 30),
        picard_tol=get("solver", "picard_tol", 1e-10),
        smallness_delta=get("solver", "smallness_delta", 0.5),
        contraction_checks=get("solver", "contraction_checks", True),
        h1_ceiling=get("solver", "h1_ceiling", 1e6),
        record_energies=get("solver", "record_energies", True),
    ))
    gwp = build("gwp", GwpConfig, dict(
        solver=solver,
        eta=get("gwp", "eta", 0.3),
        eta_tilde=get("gwp", "eta_tilde", 0.25),
        budget_c=get("gwp", "budget_c", 2.0),
        max_retries=get("gwp", "max_retries", 6),
    ))
    probe = build("probe", ProbeConfig, dict(
        sample_count=get("probe", "sample_count", 50),
        n_values=get("probe", "n_values", (1, 2, 4, 8, 16, 32, 64)),
        p=get("probe", "p", 4.0),
        interval_length=get("probe", "interval_length", 1.0),
        seed=seed,
        time_nodes=get("probe", "time_nodes", 17),
        mode_radius_cap=get("probe", "mode_radius_cap", 32),
        theta=get("grid", "theta", (1.0, 1.0, 1.0)),
        kappa=get("probe", "kappa", 0.25),
        delta=get("probe", "delta", 0.25),
    ))
    shells = build("probe", ProbeShells, dict(
        n1=get("probe", "n1", 16),
        n2=get("probe", "n2", 2),
        n3=get("probe", "n3", 1),
        n1_values=get("probe", "n1_values", (4, 8, 16, 32)),
        n2_values=get("probe", "n2_values", (2, 4, 8, 16)),
    ))
    return RunConfig(
        command=command, seed=seed, out_format=out_format, grid=grid,
        params=params, initial=initial, interval=interval, solver=solver,
        gwp=gwp, probe=probe, shells=shells,
    )


def serialize_config(cfg: RunConfig) -> str:
    """Emit config text that parses back to an equal RunConfig."""
    mode = " ".join(str(m) for m in cfg.initial.mode)
    theta = " ".join(repr(t) for t in cfg.grid.theta)
    lines = [
        "[run]",
        f"command = {cfg.command}",
        f"seed = {cfg.seed}",
        f"format = {cfg.out_format}",
        "",
        "[grid]",
        f"mode_radius = {cfg.grid.mode_radius}",
        f"phys_points = {cfg.grid.phys_points}",
        f"theta = {theta}",
        "",
        "[equation]",
        f"mu1 = {cfg.params.mu1!r}",
        f"mu2 = {cfg.params.mu2!r}",
        "",
        "[initial]",
        f"kind = {cfg.initial.kind}",
        f"amplitude = {cfg.initial.amplitude!r}",
        f"h1_norm = {cfg.initial.h1_norm!r}",
        f"support_radius = {cfg.initial.support_radius}",
        f"mode = {mode}",
    ]
    if cfg.initial.checkpoint:
        lines.append(f"checkpoint = {cfg.initial.checkpoint}")
    lines += [
        "",
        "[time]",
        f"t_start = {cfg.interval.start!r}",
        f"t_end = {cfg.interval.end!r}",
        "",
        "[solver]",
        f"dt = {cfg.solver.dt!r}",
        f"picard_max_iters = {cfg.solver.picard_max_iters}",
        f"picard_tol = {cfg.solver.picard_tol!r}",
        f"smallness_delta = {cfg.solver.smallness_delta!r}",
        f"contraction_checks = {'true' if cfg.solver.contraction_checks else 'false'}",
        f"h1_ceiling = {cfg.solver.h1_ceiling!r}",
        f"record_energies = {'true' if cfg.solver.record_energies else 'false'}",
        "",
        "[gwp]",
        f"eta = {cfg.gwp.eta!r}",
        f"eta_tilde = {cfg.gwp.eta_tilde!r}",
        f"budget_c = {cfg.gwp.budget_c!r}",
        f"max_retries = {cfg.gwp.max_retries}",
        "",
        "[probe]",
        f"sample_count = {cfg.probe.sample_count}",
        f"n_values = {' '.join(str(n) for n in cfg.probe.n_values)}",
        f"p = {cfg.probe.p!r}",
        f"interval_length = {cfg.probe.interval_length!r}",
        f"time_nodes = {cfg.probe.time_nodes}",
        f"mode_radius_cap = {cfg.probe.mode_radius_cap}",
        f"kappa = {cfg.probe.kappa!r}",
        f"delta = {cfg.probe.delta!r}",
        f"n1 = {cfg.shells.n1}",
        f"n2 = {cfg.shells.n2}",
        f"n3 = {cfg.shells.n3}",
        f"n1_values = {' '.join(str(n) for n in cfg.shells.n1_values)}",
        f"n2_values = {' '.join(str(n) for n in cfg.shells.n2_values)}",
    ]
    return "\n".join(lines) + "\n"


def with_overrides(cfg: RunConfig, command: str | None = None, seed: int | None = None,
                   out_format: str | None = None) -> RunConfig:
    """Apply command-line overrides, keeping the probe seed in sync."""
    if command is not None:
        cfg = dataclasses.replace(cfg, command=command)
    if seed is not None:
        probe = dataclasses.replace(cfg.probe, seed=seed)
        cfg = dataclasses.replace(cfg, seed=seed, probe=probe)
    if out_format is not None:
        cfg = dataclasses.replace(cfg, out_format=out_format)
    return cfg
