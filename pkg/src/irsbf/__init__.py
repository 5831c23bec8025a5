"""Hybrid analog/digital beamforming with an intelligent reflecting surface for
wideband multi-user downlinks: scenario and channel generation, conic solver
interface, SCA-based digital and reflection design, robust design under
bounded CSI errors, and sweep tooling."""

from .algorithm import AlgorithmOptions, RunRecord, draw_estimate, run_algorithm1, run_robust
from .analog import analog_phases, average_gram
from .channel import (ChannelSet, CsiError, dump_channels, estimated_channels, generate_channels,
                      load_channels, sample_csi_error, steering_vector)
from .conic import ConicProgram, ConicSolution, extract_rank_one, kkt_residuals, rank_one_ratio, solve
from .experiments import SweepSpec, emit_plot, read_csv, run_sweep, write_csv
from .rates import (BeamformingSolution, per_user_rates, robust_rate_mc, user_rate,
                    weighted_sum_rate)
from .robust import certified_weighted_rate, monte_carlo_soundness
from .sca import SubproblemError, UncertaintyTooLarge
from .scenario import Geometry, SystemConfig, default_geometry, desk_config, paper_config

__version__ = "0.1.0"
