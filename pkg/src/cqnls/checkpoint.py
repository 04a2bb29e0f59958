"""Binary trajectory checkpoints.

Layout (all little-endian, no padding):

    magic   6 bytes  b"CQNLS1"
    version u16      currently 1
    K       u32      lattice mode radius
    phys    u32      physical points per axis
    theta   3 f64    dispersion weights
    mu1     f64
    mu2     f64
    nodes   u64      number of time nodes
    times   nodes x f64
    coeffs  nodes x (2K+1)^3 x complex128, C order

Round trips are bit-exact.  Per-node energies are derived diagnostics,
not state, and are not stored.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .norms import Trajectory
from .spectral import ConfigurationError, EquationParams, TorusGrid

MAGIC = b"CQNLS1"
VERSION = 1
_HEADER = struct.Struct("<6sHII5dQ")


class CheckpointError(ValueError):
    """Malformed checkpoint file."""


def write_checkpoint(traj: Trajectory, path) -> None:
    grid = traj.grid
    header = _HEADER.pack(
        MAGIC, VERSION, grid.mode_radius, grid.phys_points,
        grid.theta[0], grid.theta[1], grid.theta[2],
        traj.params.mu1, traj.params.mu2, traj.node_count,
    )
    times = np.ascontiguousarray(traj.times, dtype="<f8")
    coeffs = np.ascontiguousarray(traj.coeffs, dtype="<c16")
    Path(path).write_bytes(header + times.tobytes() + coeffs.tobytes())


def read_checkpoint(path) -> Trajectory:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if len(data) < _HEADER.size:
        raise CheckpointError(f"file too short for a checkpoint header ({len(data)} bytes)")
    magic, version, k, phys, th0, th1, th2, mu1, mu2, nodes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    side = 2 * k + 1
    lattice = side**3
    expected = _HEADER.size + nodes * 8 + nodes * lattice * 16
    if len(data) != expected:
        raise CheckpointError(
            f"payload length mismatch: file has {len(data)} bytes, header implies {expected}"
        )
    times = np.frombuffer(data, dtype="<f8", count=nodes, offset=_HEADER.size).copy()
    coeffs = (
        np.frombuffer(data, dtype="<c16", count=nodes * lattice,
                      offset=_HEADER.size + nodes * 8)
        .reshape(nodes, side, side, side)
        .copy()
    )
    try:
        grid = TorusGrid(k, phys_points=phys, theta=(th0, th1, th2))
        params = EquationParams(mu1, mu2)
        return Trajectory(grid, params, times, coeffs)
    except (ConfigurationError, ValueError) as exc:
        raise CheckpointError(f"checkpoint contents invalid: {exc}") from exc
