"""Covariance-based device activity detection for cell-free massive MIMO
with hybrid near-field / far-field channels.
"""
from .channel import PathLossModel, build_channel_stats, sample_channel
from .detection import DetectionReport, equal_error_point, pm_pf, similarity_diagnostics
from .geometry import Deployment, DeploymentConfig, rayleigh_distance, sample_deployment
from .harness import DESK, ExperimentConfig, SweepSpec, run_sweep, run_trials
from .likelihood import LocalModel, build_local_model, init_precision, nll
from .signals import generate_signatures, sample_activity, synthesize_received
from .solver_consensus import (
    ConfigError,
    ConsensusConfig,
    Problem,
    account_overhead,
    run_centralized,
    run_distributed,
)
from .solver_local import CdConfig, far_field_fast_path, local_solve, mismatched_cd

__version__ = "0.1.0"
