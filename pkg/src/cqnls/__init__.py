"""Pseudospectral simulation and norm diagnostics for a cubic-quintic
dispersive equation on the 3-torus."""

from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .config import (ConfigParseError, InitialSpec, InvariantViolationError,
                     ProbeShells, RunConfig, TypeMismatchError,
                     UnknownKeyError, parse_config, serialize_config,
                     with_overrides)
from .evolution import (BlowUpSuspected, NoContractionError,
                        PartitionInfeasibleError, PicardResult, SolverConfig,
                        duhamel_fixed_point, evolve, partition_by_zprime,
                        picard_solve, strang_step, time_grid)
from .gwp import (GwpConfig, GwpLedger, GwpLedgerRow, run_gwp_scheme,
                  solve_difference_equation, solve_quintic_reference)
from .norms import (NormReport, TimeInterval, Trajectory,
                    UnsupportedRegimeError, compute_norm_report,
                    discrete_two_variation, energy, kinetic_bound_constant,
                    mass, sobolev_norm, spacetime_lp, v2_delta_proxy,
                    x1_proxy_and_zprime, y_norm_proxy, z_norm)
from .probes import (KineticBoundReport, ProbeConfig, ProbeReport,
                     monitor_kinetic_bound, probe_bilinear,
                     probe_bilinear_sweep, probe_strichartz, probe_trilinear,
                     probe_trilinear_sweep, sample_shell_field, shell_grid)
from .projectors import (bump_eta, cumulative_weight, dyadic_shells,
                         project_cube, project_cumulative, project_dyadic,
                         shell_weight)
from .spectral import (FOURIER_PREFACTOR, ConfigurationError, EquationParams,
                       SpectralField, TorusGrid, apply_gradient_square,
                       apply_propagator, constant_field, evaluate_nonlinearity,
                       forward_transform, inverse_transform, mode_field,
                       nice_grid_size, zero_field)

__version__ = "0.1.0"
