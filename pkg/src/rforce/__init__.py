"""Reservoir networks with spectrally planned initialization trained by FORCE.

The hot integration and RLS loop runs in a compiled kernel when available and
falls back to numpy otherwise; ``rforce.BACKEND`` names the active one.
"""

from ._kernels import BACKEND
from .checkpoint import load_checkpoint, save_checkpoint
from .diagnostics import jacobian, snapshot_run, stability_metrics
from .dynamics import DivergenceError, NetworkState, Rank1Network, RankNNetwork, build_network
from .experiments import ExperimentRecord, SweepConfig, aggregate, run_motion, run_sweep
from .metrics import confidence_interval, mae
from .spectral_init import make_reservoir, plan_ablation, plan_rforce
from .targets import TargetSeries, make_target, multi_periodic, synthetic_motion
from .training import TrainingSchedule, train, train_rank1, train_rankN

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DivergenceError", "ExperimentRecord", "NetworkState", "Rank1Network",
    "RankNNetwork", "SweepConfig", "TargetSeries", "TrainingSchedule", "aggregate",
    "build_network", "confidence_interval", "jacobian", "load_checkpoint", "mae",
    "make_reservoir", "make_target", "multi_periodic", "plan_ablation", "plan_rforce",
    "run_motion", "run_sweep", "save_checkpoint", "snapshot_run", "stability_metrics",
    "synthetic_motion", "train", "train_rank1", "train_rankN",
]
