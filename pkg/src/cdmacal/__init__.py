"""Delay-constrained throughput analysis for a randomly spread CDMA uplink
with linear MMSE multiuser detection and adaptive modulation/coding.

The pipeline: a large-system fixed point turns load and SNR into a
post-detection SNR scale, a birth-death Markov chain over the modulation
modes turns Doppler into slot-level service, and a moment-generating-
function bound turns that service into probabilistic delay guarantees and
the largest arrival rate that honors them.  Monte Carlo counterparts check
every analytical stage.
"""
__version__ = "0.1.0"

from .amc import (CapacityEstimate, Mode, ModeTable, ThresholdCheck,
                  constellation_capacity, constellation_points,
                  default_mode_table, select_mode, verify_thresholds)
from .errors import ConfigError, SlowFadingViolation
from .experiment import (ExperimentSpec, NetcalControls, build_spec,
                         evaluate_point, metadata_lines, parse_config,
                         render_csv, run_experiment, write_csv)
from .fsmc import (FsmcModel, build_fsmc, level_crossing_rate,
                   stationary_distribution)
from .largesys import (DecoupledChannel, SystemConfig, interference_integral,
                       interference_integral_closed_form,
                       post_detection_snr_pdf, solve_fixed_point)
from .netcal import (DelayBoundResult, PeriodicSource, ServiceMgf,
                     ThroughputResult, capacity_limit, arrival_mgf,
                     default_theta_grid, delay_bound,
                     delay_constrained_throughput)
from .sim import (FiniteSystemSample, QueueTrace, sample_finite_sinr,
                  sample_finite_sinr_batch, simulate_fifo_queue,
                  simulate_fsmc)
from .units import db_to_linear, linear_to_db

__all__ = [
    "CapacityEstimate", "Mode", "ModeTable", "ThresholdCheck",
    "constellation_capacity", "constellation_points", "default_mode_table",
    "select_mode", "verify_thresholds",
    "ConfigError", "SlowFadingViolation",
    "ExperimentSpec", "NetcalControls", "build_spec", "evaluate_point",
    "metadata_lines", "parse_config", "render_csv", "run_experiment",
    "write_csv",
    "FsmcModel", "build_fsmc", "level_crossing_rate",
    "stationary_distribution",
    "DecoupledChannel", "SystemConfig", "interference_integral",
    "interference_integral_closed_form", "post_detection_snr_pdf",
    "solve_fixed_point",
    "DelayBoundResult", "PeriodicSource", "ServiceMgf", "ThroughputResult",
    "capacity_limit", "arrival_mgf", "default_theta_grid", "delay_bound",
    "delay_constrained_throughput",
    "FiniteSystemSample", "QueueTrace", "sample_finite_sinr",
    "sample_finite_sinr_batch", "simulate_fifo_queue", "simulate_fsmc",
    "db_to_linear", "linear_to_db",
    "__version__",
]
