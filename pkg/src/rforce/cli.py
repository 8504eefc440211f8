"""Command-line entry point: ``rforce {spectrum,train,sweep,diagnose,motion}``.

Exit codes: 0 success, 1 argument error, 2 runtime or numerical error.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import _kernels
from .checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from .diagnostics import snapshot_run, snapshot_summary, write_spectrum_csv
from .dynamics import DivergenceError, build_network
from .experiments import (SweepConfig, aggregate, default_jobs, motion_schedule, run_motion,
                          run_sweep, write_aggregate, write_error_curve_csv, write_records)
from .spectral_init import (INIT_KINDS, make_reservoir, plan_ablation, plan_rforce,
                            sample_plan_eigenvalues)
from .targets import (DEFAULT_BASE_PERIOD, TargetFormatError, episodes_series, load_motion_csv,
                      make_target, synthetic_motion)
from .training import TrainingSchedule, train

log = logging.getLogger("rforce")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _schedule_flags(p):
    g = p.add_argument_group("schedule")
    g.add_argument("--dt", type=float, default=0.1, help="Forward-Euler step (default: 0.1)")
    g.add_argument("--warmup", type=float, default=100.0,
                   help="warm-up duration, time units (default: 100)")
    g.add_argument("--train", type=float, default=1000.0, dest="train_time",
                   help="training duration, time units (default: 1000)")
    g.add_argument("--test", type=float, default=1000.0, dest="test_time",
                   help="testing duration, time units (default: 1000)")
    g.add_argument("--update-interval", type=int, default=2,
                   help="steps between RLS updates (default: 2)")
    g.add_argument("--alpha", type=float, default=1.0,
                   help="RLS regularizer, P(0) = I/alpha (default: 1.0)")
    g.add_argument("--x0-scale", type=float, default=0.5,
                   help="std of the initial activations (default: 0.5)")


def _network_flags(p, n=1000, g=1.5, init="rforce"):
    p.add_argument("--init", choices=INIT_KINDS, default=init,
                   help=f"reservoir initialization (default: {init})")
    p.add_argument("--n", type=int, default=n, help=f"reservoir units (default: {n})")
    p.add_argument("--g", type=float, default=g, help=f"global gain (default: {g})")
    p.add_argument("--p", type=float, default=0.1,
                   help="sparsity of the normal initialization (default: 0.1)")
    p.add_argument("--m", type=int, default=4,
                   help="circle count of the four-uniform ablation (default: 4)")
    p.add_argument("--seed", type=int, default=42, help="master seed (default: 42)")


def _target_flags(p):
    p.add_argument("--target", choices=("multiperiodic", "discontinuous", "noisy"),
                   default="multiperiodic", help="target family (default: multiperiodic)")
    p.add_argument("--n-sines", type=int, default=4, help="harmonics in the target (default: 4)")
    p.add_argument("--base-period", type=float, default=DEFAULT_BASE_PERIOD,
                   help=f"target period, time units (default: {DEFAULT_BASE_PERIOD:g})")
    p.add_argument("--sigma", type=float, default=0.1,
                   help="noise std of the noisy target (default: 0.1)")


def build_parser():
    parser = _Parser(prog="rforce", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys override the flags")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="planned or assembled reservoir eigenvalues as CSV")
    _network_flags(p)
    p.add_argument("--source", choices=("plan", "matrix"), default="plan",
                   help="sampled plan values, or eigenvalues recomputed from the assembled "
                        "matrix (default: plan)")
    p.add_argument("--matrix-out", help="also save the assembled reservoir as a checkpoint")
    p.add_argument("--out", required=True, help="CSV path (re,im,arc_index)")

    p = sub.add_parser("train", help="train one network and write a checkpoint")
    _network_flags(p)
    p.add_argument("--arch", choices=("rank1", "rankN"), default="rank1",
                   help="architecture (default: rank1)")
    _target_flags(p)
    _schedule_flags(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--record", help="JSON path for the run record")

    p = sub.add_parser("sweep", help="g-grid x trials experiment, JSONL records")
    _network_flags(p, n=1000)
    p.add_argument("--arch", choices=("rank1", "rankN"), default="rank1",
                   help="architecture (default: rank1)")
    p.add_argument("--g-min", type=float, default=1.0, help="grid start (default: 1.0)")
    p.add_argument("--g-max", type=float, default=2.0, help="grid end (default: 2.0)")
    p.add_argument("--g-step", type=float, default=0.1, help="grid step (default: 0.1)")
    p.add_argument("--trials", type=int, default=8, help="trials per g (default: 8)")
    _target_flags(p)
    _schedule_flags(p)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: available parallelism)")
    p.add_argument("--out", required=True, help="JSONL path for per-run records")
    p.add_argument("--aggregate", help="aggregate JSON path (default: <out>.aggregate.json)")
    p.add_argument("--curve", help="error-curve CSV path (default: <out>.curve.csv)")

    p = sub.add_parser("diagnose", help="Jacobian spectrum snapshots of a checkpointed network")
    p.add_argument("--checkpoint", required=True, help="checkpoint written by 'train'")
    p.add_argument("--cadence", type=int, default=50, help="steps between snapshots (default: 50)")
    p.add_argument("--no-train", action="store_true",
                   help="evolve with fixed weights instead of training")
    p.add_argument("--seed", type=int, default=42, help="seed of the initial state (default: 42)")
    _target_flags(p)
    _schedule_flags(p)
    p.add_argument("--out", required=True, help="spectrum CSV path (re,im,t,phase)")
    p.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")

    p = sub.add_parser("motion", help="66-channel motion target-learning from a CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", help="66-column motion CSV (optional header row)")
    src.add_argument("--synthetic", action="store_true",
                     help="use the built-in 66-channel synthetic stand-in")
    p.add_argument("--episodes", type=int, default=15,
                   help="times the recording is repeated (default: 15)")
    p.add_argument("--test-episodes", type=int, default=1,
                   help="episodes of free-running test (default: 1)")
    _network_flags(p, n=400)
    p.add_argument("--alpha", type=float, default=1.0, help="RLS regularizer (default: 1.0)")
    p.add_argument("--out", help="JSON path for the record (default: stdout)")
    return parser


def _apply_config(args):
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read --config {args.config}: {exc}") from exc
    aliases = {"train": "train_time", "test": "test_time"}
    for key, value in overrides.items():
        dest = aliases.get(key, key.replace("-", "_"))
        if not hasattr(args, dest):
            raise UsageError(f"--config key {key!r} is not a flag of '{args.command}'")
        setattr(args, dest, value)
    return args


def _schedule(args):
    return TrainingSchedule(args.warmup, args.train_time, args.test_time, args.dt,
                            args.update_interval)


def _effective(args):
    return {k: v for k, v in vars(args).items() if k != "config"}


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_spectrum(args):
    n = args.n
    if args.init == "normal":
        if args.source == "plan":
            raise UsageError("the normal initialization has no plan; use --source matrix")
        res = make_reservoir("normal", args.g, n, args.seed, p=args.p)
        eig = np.linalg.eigvals(args.g * res.entries)
        arc = np.full(n, -1)
    else:
        plan = (plan_rforce(args.g, n) if args.init == "rforce"
                else plan_ablation(args.init, args.g, n, args.m))
        upper, upper_arc = sample_plan_eigenvalues(plan, args.seed)
        planned = np.empty(n, dtype=complex)
        planned[0::2], planned[1::2] = upper, upper.conj()
        arc = np.repeat(upper_arc, 2)
        if args.source == "plan" and not args.matrix_out:
            eig = planned
        else:
            res = make_reservoir(args.init, args.g, n, args.seed, m=args.m)
            if args.matrix_out:
                net = build_network("rank1", args.init, args.g, n, 1, args.seed, m=args.m)
                save_checkpoint(net, args.matrix_out, extra={"source": "spectrum"})
            if args.source == "plan":
                eig = planned
            else:
                eig = np.linalg.eigvals(res.entries)
                # label each computed eigenvalue with the arc of its nearest planned value
                nearest = np.argmin(np.abs(eig[:, None] - planned[None, :]), axis=1)
                arc = arc[nearest]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "arc_index"])
        for lam, a in zip(eig, arc):
            w.writerow([repr(float(lam.real)), repr(float(lam.imag)), int(a)])
    log.info("wrote %d eigenvalues to %s", len(eig), args.out)
    return 0


def cmd_train(args):
    sched = _schedule(args)
    target = make_target(args.target, sched.total_steps * sched.dt, sched.dt, args.base_period,
                         args.n_sines, args.sigma, args.seed)
    net = build_network(args.arch, args.init, args.g, args.n, target.k, args.seed,
                        p=args.p, m=args.m)
    trained, trace = train(net, target, sched, args.seed, args.alpha, args.x0_scale)
    save_checkpoint(trained, args.out, schedule=sched, state=trace.final_state,
                    extra={"config": _effective(args), "target": target.params})
    record = {
        "g": args.g, "seed": args.seed, "init_kind": args.init, "architecture": args.arch,
        "n": args.n, "k": target.k, "target_name": target.name,
        "train_mae": trace.train_mae, "test_mae": trace.test_mae,
        "test_mae_noisy": trace.test_mae_noisy, "diverged": False,
        "schedule": sched.to_dict(), "kernel": _kernels.BACKEND, "config": _effective(args),
        "checkpoint": args.out,
    }
    _write_json(record, args.record)
    return 0


def cmd_sweep(args):
    config = SweepConfig(
        init=args.init, arch=args.arch, n=args.n, g_min=args.g_min, g_max=args.g_max,
        g_step=args.g_step, trials=args.trials, target=args.target, n_sines=args.n_sines,
        base_period=args.base_period, noise_sigma=args.sigma, schedule=_schedule(args),
        alpha=args.alpha, p=args.p, m=args.m, x0_scale=args.x0_scale, master_seed=args.seed,
    )

    def progress(r):
        log.info("g=%.2f trial=%d test_mae=%.4f%s", r.g, r.trial, r.test_mae,
                 " (diverged)" if r.diverged else "")

    jobs = args.jobs if args.jobs is not None else default_jobs()
    records = run_sweep(config, jobs=jobs, progress=progress)
    write_records(records, args.out)
    agg = aggregate(records)
    write_aggregate(agg, args.aggregate or f"{args.out}.aggregate.json", config)
    write_error_curve_csv(agg, args.curve or f"{args.out}.curve.csv")
    return 0


def cmd_diagnose(args):
    net = load_checkpoint(args.checkpoint)
    sched = _schedule(args)
    target = None
    if not args.no_train:
        target = make_target(args.target, sched.total_steps * sched.dt, sched.dt,
                             args.base_period, args.n_sines, args.sigma, args.seed)
        if target.k != net.k:
            raise UsageError(f"checkpoint has {net.k} readouts; the target has {target.k}")
    snaps = snapshot_run(net, sched, args.cadence, target, args.seed,
                         training=not args.no_train, alpha=args.alpha, x0_scale=args.x0_scale)
    write_spectrum_csv(snaps, args.out)
    summary = snapshot_summary(snaps, sched.dt)
    summary["config"] = _effective(args)
    _write_json(summary, args.summary or f"{args.out}.summary.json")
    return 2 if summary["diverged"] else 0


def cmd_motion(args):
    if args.csv:
        series = load_motion_csv(args.csv, args.episodes)
    else:
        series = episodes_series(synthetic_motion(seed=args.seed), args.episodes,
                                 "synthetic-motion", params={"kind": "synthetic"})
    sched = motion_schedule(series, test_episodes=args.test_episodes)
    rec = run_motion(series, n=args.n, g=args.g, init=args.init, seed=args.seed,
                     schedule=sched, alpha=args.alpha)
    out = rec.to_dict()
    out["config"] = dict(out["config"], **_effective(args))
    _write_json(out, args.out)
    return 2 if rec.diverged else 0


COMMANDS = {
    "spectrum": cmd_spectrum,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "diagnose": cmd_diagnose,
    "motion": cmd_motion,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser.parse_args(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rforce {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TargetFormatError, CheckpointFormatError, OSError) as exc:
        print(f"rforce {args.command}: error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, ValueError) and not isinstance(
            exc, (TargetFormatError, CheckpointFormatError)) else 2
    except (DivergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"rforce {args.command}: numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
