import json

import numpy as np
import pytest

from rforce.experiments import (
    DIVERGED_MAE, OUTLIER_MAE, ExperimentRecord, SweepConfig, aggregate, read_records,
    run_motion, run_sweep, run_trial, trial_seed, write_aggregate, write_error_curve_csv,
    write_records,
)
from rforce.targets import episodes_series, synthetic_motion
from rforce.training import TrainingSchedule

TINY = SweepConfig(n=30, g_min=1.0, g_max=1.2, g_step=0.1, trials=2,
                   schedule=TrainingSchedule(warmup=5.0, train=30.0, test=10.0))


def test_default_grid():
    cfg = SweepConfig()
    assert cfg.grid() == [round(1.0 + 0.1 * i, 1) for i in range(11)]
    assert len(cfg.grid()) * cfg.trials == 88
    assert cfg.n == 1000 and cfg.schedule.dt == 0.1


def test_config_round_trip():
    cfg = SweepConfig.from_dict(TINY.to_dict())
    assert cfg == TINY
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"bogus": 1})


def test_trial_seeds_distinct():
    seeds = {trial_seed(42, g, t) for g in SweepConfig().grid() for t in range(8)}
    assert len(seeds) == 88


def test_sweep_counts_and_order():
    recs = run_sweep(TINY, jobs=1)
    assert len(recs) == 6
    assert [(r.g, r.trial) for r in recs] == [(g, t) for g in (1.0, 1.1, 1.2) for t in (0, 1)]
    assert all(r.test_mae >= 0 and r.train_mae >= 0 for r in recs)
    assert all(r.config["n"] == 30 and r.schedule["dt"] == 0.1 for r in recs)


def _key(r):
    d = r.to_dict()
    for k in ("started_at", "finished_at", "runtime_s"):
        d.pop(k)
    return json.dumps(d, sort_keys=True)


def test_sweep_deterministic_across_workers():
    a = sorted(map(_key, run_sweep(TINY, jobs=1)))
    b = sorted(map(_key, run_sweep(TINY, jobs=2)))
    assert a == b


def test_divergence_recorded_not_raised(monkeypatch):
    import rforce.experiments as ex

    def boom(*a, **k):
        raise ex.DivergenceError("x", phase="train", step_index=7)

    monkeypatch.setattr(ex, "train", boom)
    rec = run_trial(TINY, 1.5, 0)
    assert rec.diverged and rec.test_mae == DIVERGED_MAE and rec.outlier
    assert rec.divergence_phase == "train" and rec.divergence_step == 7


def _rec(g, mae, trial=0, diverged=False):
    return ExperimentRecord(g=g, seed=trial, trial=trial, init_kind="rforce",
                            architecture="rank1", n=10, k=1, target_name="t", train_mae=mae,
                            test_mae=mae, diverged=diverged, schedule={}, started_at="",
                            finished_at="")


def test_aggregate():
    recs = [_rec(1.0, 0.1, 0), _rec(1.0, 0.3, 1), _rec(2.0, 0.5, 0), _rec(2.0, 1.0, 1, True)]
    agg = aggregate(recs)
    g1, g2 = agg["per_g"]
    assert g1["test_mean"] == pytest.approx(0.2) and g1["outlier_frac"] == 0
    assert g2["outlier_frac"] == 1.0 and g2["diverged_frac"] == 0.5
    assert agg["all"]["test_mean"] == pytest.approx(0.475)
    assert agg["all_per_g_mean"]["test_mean"] == pytest.approx(0.475)
    assert agg["ci_method"] == "student-t" and agg["outlier_threshold"] == OUTLIER_MAE


def test_aggregate_recomputes_from_files(tmp_path):
    recs = run_sweep(TINY, jobs=1)
    path = tmp_path / "runs.jsonl"
    write_records(recs, path)
    back = read_records(path)
    assert [r.to_dict() for r in back] == [r.to_dict() for r in recs]
    assert aggregate(back) == aggregate(recs)
    write_aggregate(aggregate(back), tmp_path / "agg.json", TINY)
    write_error_curve_csv(aggregate(back), tmp_path / "curve.csv")
    lines = (tmp_path / "curve.csv").read_text().splitlines()
    assert lines[0] == "g,mean_mae,ci_half,outlier_frac,phase" and len(lines) == 7


def test_motion_synthetic_small():
    series = episodes_series(synthetic_motion(n_frames=60), 3, "syn")
    rec = run_motion(series, n=60, g=1.5, seed=0)
    assert rec.k == 66 and len(rec.test_mae_channels) == 66
    assert len(rec.config["test_mae_channels_original"]) == 66
    assert rec.test_mae == pytest.approx(np.mean(rec.test_mae_channels))
