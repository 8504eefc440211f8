"""g-sweeps over repeated trials, aggregation and result files.

Each trial is a pure function of the sweep configuration, the gain and the
trial index, so a sweep returns the same records however its trials are
scheduled across workers.
"""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
import json
import logging
import math
import os
import time

import numpy as np

from . import _kernels
from .dynamics import DivergenceError, build_network
from .metrics import CI_METHOD, confidence_interval, mae  # noqa: F401
from .seeding import derive_seed
from .targets import DEFAULT_BASE_PERIOD, episodes_series, make_target
from .training import TrainingSchedule, train

log = logging.getLogger(__name__)

#: Test MAE recorded for diverged runs (targets live in [-1, 1]).
DIVERGED_MAE = 1.0
#: Runs with test MAE above this count as outliers.
OUTLIER_MAE = 0.4


@dataclass(frozen=True)
class SweepConfig:
    init: str = "rforce"
    arch: str = "rank1"
    n: int = 1000
    g_min: float = 1.0
    g_max: float = 2.0
    g_step: float = 0.1
    trials: int = 8
    target: str = "multiperiodic"
    n_sines: int = 4
    base_period: float = DEFAULT_BASE_PERIOD
    noise_sigma: float = 0.1
    schedule: TrainingSchedule = field(default_factory=TrainingSchedule)
    alpha: float = 1.0
    p: float = 0.1
    m: int = 4
    x0_scale: float = 0.5
    master_seed: int = 42

    def grid(self):
        count = int(math.floor((self.g_max - self.g_min) / self.g_step + 1e-9)) + 1
        return [round(self.g_min + i * self.g_step, 10) for i in range(count)]

    def to_dict(self):
        d = asdict(self)
        d["schedule"] = self.schedule.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("schedule"), dict):
            d["schedule"] = TrainingSchedule(**d["schedule"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ExperimentRecord:
    g: float
    seed: int
    trial: int
    init_kind: str
    architecture: str
    n: int
    k: int
    target_name: str
    train_mae: float
    test_mae: float
    diverged: bool
    schedule: dict
    started_at: str
    finished_at: str
    runtime_s: float = 0.0
    test_mae_noisy: float | None = None
    test_mae_channels: list | None = None
    divergence_phase: str | None = None
    divergence_step: int | None = None
    kernel: str = ""
    config: dict = field(default_factory=dict)

    @property
    def outlier(self):
        return self.diverged or self.test_mae > OUTLIER_MAE

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def trial_seed(master_seed, g, trial):
    """Per-trial seed keyed on the trial index and the gain (in 1e-3 units)."""
    return derive_seed(master_seed, "trial", trial, int(round(g * 1000)))


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def run_trial(config, g, trial, target=None):
    """Build, train and score one network; divergences become sentinel records."""
    seed = trial_seed(config.master_seed, g, trial)
    sched = config.schedule
    if target is None:
        target = make_target(config.target, sched.total_steps * sched.dt, sched.dt,
                             config.base_period, config.n_sines, config.noise_sigma, seed)
    started, t0 = _now(), time.perf_counter()
    net = build_network(config.arch, config.init, g, config.n, target.k, seed,
                        p=config.p, m=config.m)
    rec = dict(
        g=g, seed=seed, trial=trial, init_kind=config.init, architecture=net.architecture,
        n=config.n, k=target.k, target_name=target.name, schedule=sched.to_dict(),
        kernel=_kernels.BACKEND, config=config.to_dict(),
    )
    try:
        _, trace = train(net, target, sched, seed, config.alpha, config.x0_scale)
    except DivergenceError as exc:
        log.info("g=%s trial=%d diverged in %s at step %s", g, trial, exc.phase, exc.step_index)
        rec.update(train_mae=DIVERGED_MAE, test_mae=DIVERGED_MAE, diverged=True,
                   divergence_phase=exc.phase, divergence_step=exc.step_index)
    else:
        rec.update(train_mae=trace.train_mae, test_mae=trace.test_mae, diverged=False,
                   test_mae_noisy=trace.test_mae_noisy)
        if target.k > 1:
            rec["test_mae_channels"] = [float(v) for v in trace.test_mae_channels]
    return ExperimentRecord(started_at=started, finished_at=_now(),
                            runtime_s=time.perf_counter() - t0, **rec)


def _run_task(args):
    config, g, trial = args
    return run_trial(config, g, trial)


def default_jobs():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # not on Linux
        return os.cpu_count() or 1


def run_sweep(config, jobs=None, sink=None, progress=None):
    """Run ``grid x trials`` trials; returns records ordered by (g, trial).

    ``sink`` (a path) receives one JSON line per record in that order.
    """
    tasks = [(config, g, t) for g in config.grid() for t in range(config.trials)]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    records = []
    if jobs == 1:
        for task in tasks:
            records.append(_run_task(task))
            if progress:
                progress(records[-1])
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_run_task, tasks):
                records.append(rec)
                if progress:
                    progress(rec)
    if sink is not None:
        write_records(records, sink)
    return records


def write_records(records, path, append=False):
    with open(path, "a" if append else "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_records(path):
    with open(path) as fh:
        return [ExperimentRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def _summary(values, level):
    values = np.asarray(values, dtype=float)
    if values.size >= 2:
        mean, half = confidence_interval(values, level)
    else:
        mean, half = float(values.mean()), float("nan")
    return mean, half


def aggregate(records, level=0.99):
    """Per-g means and CIs of train/test MAE plus outlier fractions.

    ``all`` pools every trial of the grid; ``all_per_g_mean`` averages the
    per-g means instead.
    """
    by_g = {}
    for r in records:
        by_g.setdefault(r.g, []).append(r)
    per_g = []
    for g in sorted(by_g):
        rs = by_g[g]
        test_mean, test_half = _summary([r.test_mae for r in rs], level)
        train_mean, train_half = _summary([r.train_mae for r in rs], level)
        per_g.append({
            "g": g,
            "trials": len(rs),
            "test_mean": test_mean,
            "test_ci_half": test_half,
            "test_median": float(np.median([r.test_mae for r in rs])),
            "train_mean": train_mean,
            "train_ci_half": train_half,
            "outlier_frac": sum(r.outlier for r in rs) / len(rs),
            "diverged_frac": sum(r.diverged for r in rs) / len(rs),
        })
    pooled_mean, pooled_half = _summary([r.test_mae for r in records], level)
    means = [row["test_mean"] for row in per_g]
    mean_of_means, half_of_means = _summary(means, level) if means else (float("nan"),) * 2
    return {
        "ci_method": CI_METHOD,
        "ci_level": level,
        "outlier_threshold": OUTLIER_MAE,
        "per_g": per_g,
        "all": {"test_mean": pooled_mean, "test_ci_half": pooled_half,
                "outlier_frac": (sum(r.outlier for r in records) / len(records))
                if records else float("nan")},
        "all_per_g_mean": {"test_mean": mean_of_means, "test_ci_half": half_of_means},
    }


def write_aggregate(agg, path, config=None):
    out = dict(agg)
    if config is not None:
        out["config"] = config.to_dict()
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)


def write_error_curve_csv(agg, path):
    """``g,mean_mae,ci_half,outlier_frac,phase`` rows for train and test."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["g", "mean_mae", "ci_half", "outlier_frac", "phase"])
        for phase in ("train", "test"):
            for row in agg["per_g"]:
                w.writerow([row["g"], row[f"{phase}_mean"], row[f"{phase}_ci_half"],
                            row["outlier_frac"], phase])


def motion_schedule(series, warmup=100.0, test_episodes=1):
    """Train over every concatenated episode, then test for ``test_episodes`` more."""
    frames = series.params.get("frames_per_episode", series.n_steps)
    return TrainingSchedule(warmup=warmup, train=series.n_steps * series.dt,
                            test=test_episodes * frames * series.dt, dt=series.dt)


def run_motion(raw_or_series, episodes=15, n=400, g=1.5, init="rforce", seed=0,
               schedule=None, alpha=1.0, x0_scale=0.5, name="motion"):
    """Train a 66-readout Rank1 network on a normalized, episode-repeated recording.

    Returns an :class:`ExperimentRecord` whose ``test_mae_channels`` are in
    normalized units; ``config['test_mae_channels_original']`` holds the
    same errors after mapping back to the recording's units.
    """
    if hasattr(raw_or_series, "values"):
        series = raw_or_series
    else:
        series = episodes_series(np.asarray(raw_or_series, dtype=float), episodes, name)
    sched = schedule or motion_schedule(series)
    started, t0 = _now(), time.perf_counter()
    net = build_network("rank1", init, g, n, series.k, seed)
    rec = dict(g=g, seed=seed, trial=0, init_kind=init, architecture="rank1", n=n,
               k=series.k, target_name=series.name, schedule=sched.to_dict(),
               kernel=_kernels.BACKEND)
    extra = {"episodes": series.params.get("episodes"),
             "frames_per_episode": series.params.get("frames_per_episode")}
    try:
        _, trace = train(net, series, sched, seed, alpha, x0_scale)
    except DivergenceError as exc:
        rec.update(train_mae=DIVERGED_MAE, test_mae=DIVERGED_MAE, diverged=True,
                   divergence_phase=exc.phase, divergence_step=exc.step_index,
                   test_mae_channels=[DIVERGED_MAE] * series.k)
    else:
        rec.update(train_mae=trace.train_mae, test_mae=trace.test_mae, diverged=False,
                   test_mae_channels=[float(v) for v in trace.test_mae_channels])
        if series.normalization is not None:
            _, scale = series.normalization
            extra["test_mae_channels_original"] = [
                float(v) for v in np.asarray(trace.test_mae_channels) * np.abs(scale)
            ]
    return ExperimentRecord(started_at=started, finished_at=_now(),
                            runtime_s=time.perf_counter() - t0, config=extra, **rec)


__all__ = [
    "DIVERGED_MAE", "ExperimentRecord", "OUTLIER_MAE", "SweepConfig", "aggregate",
    "confidence_interval", "default_jobs", "mae", "motion_schedule", "read_records", "run_motion", "run_sweep",
    "run_trial", "trial_seed", "write_aggregate", "write_error_curve_csv", "write_records",
]
