"""Command-line front end.

Every subcommand reads an optional config file, runs one computation,
and writes its artifacts into --out. Runs with the same config and seed
produce byte-identical files: floats are serialized with repr, JSON keys
are sorted, and no timestamps or hostnames are recorded.

Exit codes:
  0  success
  2  usage or configuration problem
  3  blow-up suspected (partial trajectory checkpointed when available)
  4  iteration failed to contract
  5  no admissible partition refinement
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .config import (ConfigParseError, RunConfig, parse_config, with_overrides)
from .evolution import (BlowUpSuspected, NoContractionError,
                        PartitionInfeasibleError, evolve, picard_solve)
from .gwp import run_gwp_scheme
from .norms import compute_norm_report, sobolev_norm
from .probes import probe_bilinear_sweep, probe_strichartz, probe_trilinear_sweep
from .spectral import (SpectralField, TorusGrid, constant_field, mode_field,
                       zero_field)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BLOWUP = 3
EXIT_NO_CONTRACTION = 4
EXIT_PARTITION_INFEASIBLE = 5

_EPILOG = """\
exit codes:
  0  success
  2  usage or configuration problem
  3  blow-up suspected
  4  iteration failed to contract
  5  no admissible partition refinement

environment:
  CQNLS_THREADS  caps worker threads for probe sampling (default 1)
"""

_COMMANDS = (
    ("evolve", "split-step the equation and checkpoint the trajectory"),
    ("picard", "Duhamel fixed-point solve on one interval"),
    ("gwp", "perturbative continuation off the defocusing quintic flow"),
    ("norms", "measure a checkpointed trajectory"),
    ("probe-strichartz", "L^p size of free shell data across frequencies"),
    ("probe-bilinear", "paired-frequency product bound, N1 sweep"),
    ("probe-trilinear", "triple-frequency product bound, N2 sweep"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqnls",
        description="simulation and norm diagnostics for a cubic-quintic "
                    "dispersive flow on the 3-torus",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, help_text in _COMMANDS:
        p = sub.add_parser(name, help=help_text, epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", type=Path, default=None,
                       help="config file (INI-style sections; defaults apply when omitted)")
        p.add_argument("--out", type=Path, default=Path("."),
                       help="directory for output artifacts (default: current directory)")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="report format (default: config value, else csv)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed (unsigned 64-bit)")
    return parser


def build_initial(grid: TorusGrid, cfg: RunConfig) -> SpectralField:
    """Construct the initial field named by the [initial] section."""
    spec = cfg.initial
    if spec.kind == "constant":
        return constant_field(grid, spec.amplitude)
    if spec.kind == "plane_wave":
        return mode_field(grid, spec.mode, spec.amplitude)
    if spec.kind == "checkpoint":
        traj = read_checkpoint(spec.checkpoint)
        if traj.node_count == 0:
            raise CheckpointError(f"{spec.checkpoint} holds no trajectory nodes")
        return traj.field(traj.node_count - 1)
    # random: complex Gaussian modes on a centered subcube, scaled to the
    # requested H^1 size.  The stream is keyed on the run seed alone so the
    # same config reproduces the same field on any grid large enough.
    rng = np.random.default_rng([cfg.seed, 101])
    radius = min(spec.support_radius, grid.mode_radius)
    side = 2 * radius + 1
    block = rng.standard_normal((side,) * 3) + 1j * rng.standard_normal((side,) * 3)
    field = zero_field(grid)
    coeffs = field.coeffs.copy()
    k = grid.mode_radius
    coeffs[k - radius:k + radius + 1,
           k - radius:k + radius + 1,
           k - radius:k + radius + 1] = block
    raw = SpectralField(grid, coeffs)
    scale = spec.h1_norm / sobolev_norm(raw, 1.0)
    return raw.scaled(scale)


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _picard_report_csv(result) -> str:
    lines = [
        f"# converged={'true' if result.converged else 'false'}",
        f"# iterations={result.iterations}",
        f"# free_zprime={result.free_zprime!r}",
        f"# smallness_satisfied={'true' if result.smallness_satisfied else 'false'}",
        "iteration,residual,ratio",
    ]
    ratios = result.contraction_ratios
    for i, res in enumerate(result.residuals, start=1):
        ratio = repr(ratios[i - 2]) if i >= 2 and i - 2 < len(ratios) else "nan"
        lines.append(f"{i},{res!r},{ratio}")
    return "\n".join(lines) + "\n"


def _picard_report_json(result) -> str:
    ratios = result.contraction_ratios
    rows = []
    for i, res in enumerate(result.residuals, start=1):
        ratio = ratios[i - 2] if i >= 2 and i - 2 < len(ratios) else float("nan")
        rows.append({"iteration": i, "residual": res, "ratio": ratio})
    doc = {
        "meta": {
            "converged": result.converged,
            "iterations": result.iterations,
            "free_zprime": result.free_zprime,
            "smallness_satisfied": result.smallness_satisfied,
        },
        "rows": rows,
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _report_path(out_dir: Path, command: str, fmt: str) -> Path:
    return out_dir / f"{command}.{fmt}"


def run_command(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = cfg.out_format
    command = cfg.command

    if command == "norms":
        if not cfg.initial.checkpoint:
            print("norms needs [initial] checkpoint = <path> pointing at a trajectory",
                  file=sys.stderr)
            return EXIT_USAGE
        traj = read_checkpoint(cfg.initial.checkpoint)
        report = compute_norm_report(traj)
        text = report.to_csv() if fmt == "csv" else report.to_json()
        _write_text(_report_path(out_dir, command, fmt), text)
        return EXIT_OK

    if command.startswith("probe-"):
        if command == "probe-strichartz":
            report = probe_strichartz(cfg.probe)
        elif command == "probe-bilinear":
            report = probe_bilinear_sweep(cfg.shells.n1_values, cfg.shells.n2, cfg.probe)
        else:
            report = probe_trilinear_sweep(cfg.shells.n1, cfg.shells.n2_values,
                                           cfg.shells.n3, cfg.probe)
        text = report.to_csv() if fmt == "csv" else report.to_json()
        _write_text(_report_path(out_dir, command, fmt), text)
        return EXIT_OK

    u0 = build_initial(cfg.grid, cfg)
    ckpt_path = out_dir / "trajectory.ckpt"

    if command == "evolve":
        try:
            traj = evolve(u0, cfg.interval, cfg.params, cfg.solver)
        except BlowUpSuspected as exc:
            print(f"blow-up suspected: {exc}", file=sys.stderr)
            if exc.trajectory is not None and exc.trajectory.node_count > 0:
                write_checkpoint(exc.trajectory, ckpt_path)
                print(f"partial trajectory saved to {ckpt_path}", file=sys.stderr)
            return EXIT_BLOWUP
        write_checkpoint(traj, ckpt_path)
        report = compute_norm_report(traj)
        text = report.to_csv() if fmt == "csv" else report.to_json()
        _write_text(_report_path(out_dir, command, fmt), text)
        return EXIT_OK

    if command == "picard":
        try:
            result = picard_solve(u0, cfg.interval, cfg.params, cfg.solver)
        except NoContractionError as exc:
            print(f"no contraction: {exc}", file=sys.stderr)
            return EXIT_NO_CONTRACTION
        write_checkpoint(result.trajectory, ckpt_path)
        text = _picard_report_csv(result) if fmt == "csv" else _picard_report_json(result)
        _write_text(_report_path(out_dir, command, fmt), text)
        if not result.converged:
            print("warning: residual tolerance not reached within the sweep cap; "
                  "iteration was still contracting", file=sys.stderr)
        return EXIT_OK

    if command == "gwp":
        try:
            traj, ledger = run_gwp_scheme(u0, cfg.interval, cfg.params.mu1, cfg.gwp)
        except BlowUpSuspected as exc:
            print(f"blow-up suspected: {exc}", file=sys.stderr)
            if exc.trajectory is not None and exc.trajectory.node_count > 0:
                write_checkpoint(exc.trajectory, ckpt_path)
                print(f"partial trajectory saved to {ckpt_path}", file=sys.stderr)
            return EXIT_BLOWUP
        except NoContractionError as exc:
            print(f"no contraction: {exc}", file=sys.stderr)
            return EXIT_NO_CONTRACTION
        except PartitionInfeasibleError as exc:
            print(f"partition infeasible: {exc}", file=sys.stderr)
            return EXIT_PARTITION_INFEASIBLE
        write_checkpoint(traj, ckpt_path)
        text = ledger.to_csv() if fmt == "csv" else ledger.to_json()
        _write_text(_report_path(out_dir, command, fmt), text)
        return EXIT_OK

    print(f"unknown command {command!r}", file=sys.stderr)
    return EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.config is not None:
            text = Path(args.config).read_text(encoding="utf-8")
        else:
            text = ""
        cfg = parse_config(text)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None and not (0 <= args.seed < 2**64):
        print("--seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    cfg = with_overrides(cfg, command=args.command, seed=args.seed,
                         out_format=args.format)
    if cfg.command == "gwp" and cfg.params.mu2 != 1.0:
        print(f"gwp requires the quintic coefficient mu2 = 1, got {cfg.params.mu2}",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        return run_command(cfg, args.out)
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"invalid run: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
