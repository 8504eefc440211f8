"""FORCE training by recursive least squares.

The inverse-correlation matrix ``P`` (initially ``I / alpha``) is shared by
all readout columns and, for RankN networks, by every reservoir row: all of
them see the same presynaptic rates ``r = tanh(x)``.  Errors are network
minus target, ``e = z - f``.
"""

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .dynamics import DEFAULT_DT, DEFAULT_X0_SCALE, DivergenceError, initial_state
from .metrics import channel_mae

PHASES = ("warmup", "train", "test")


@dataclass(frozen=True)
class TrainingSchedule:
    """Phase durations in time units; weights update every ``update_interval`` steps."""

    warmup: float = 100.0
    train: float = 1000.0
    test: float = 1000.0
    dt: float = DEFAULT_DT
    update_interval: int = 2

    def __post_init__(self):
        for name in ("warmup", "train", "test", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"schedule {name} must be positive")
        if int(self.update_interval) != self.update_interval or self.update_interval < 1:
            raise ValueError("update_interval must be a positive integer")

    def _steps(self, duration):
        return int(round(duration / self.dt))

    @property
    def warmup_steps(self):
        return self._steps(self.warmup)

    @property
    def train_steps(self):
        return self._steps(self.train)

    @property
    def test_steps(self):
        return self._steps(self.test)

    @property
    def total_steps(self):
        return self.warmup_steps + self.train_steps + self.test_steps

    def to_dict(self):
        return asdict(self)


@dataclass
class RlsTrainer:
    p_matrix: np.ndarray
    alpha: float = 1.0
    update_interval: int = 2
    phase: str = "warmup"

    @classmethod
    def create(cls, n, alpha=1.0, update_interval=2, phase="warmup"):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return cls(np.eye(n) / alpha, float(alpha), int(update_interval), phase)


def rls_update(trainer, r, error, weights):
    """One RLS step; returns ``(trainer, weights)`` as new objects.

    With ``c = 1 / (1 + r^T P r)``: ``P <- P - c (P r)(P r)^T`` and each
    weight column ``j <- j - error_j * (P r)`` using the updated ``P``.
    """
    if trainer.phase != "train":
        raise RuntimeError(f"rls_update called in phase {trainer.phase!r}")
    r = np.asarray(r, dtype=float).reshape(-1)
    error = np.atleast_1d(np.asarray(error, dtype=float))
    weights = np.asarray(weights, dtype=float)
    squeeze = weights.ndim == 1
    w = weights.reshape(r.size, -1)
    if w.shape[1] != error.size:
        raise ValueError(f"{error.size} errors for {w.shape[1]} weight columns")
    pr = trainer.p_matrix @ r
    c = 1.0 / (1.0 + r @ pr)
    p_new = trainer.p_matrix - c * np.outer(pr, pr)
    w_new = w - np.outer(c * pr, error)
    if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(w_new))):
        raise DivergenceError("RLS update produced non-finite values", phase="train")
    return replace(trainer, p_matrix=p_new), (w_new.reshape(-1) if squeeze else w_new)


@dataclass
class ErrorTrace:
    """Per-phase errors of one training run.

    ``*_abs_error`` are per-step absolute errors averaged over channels;
    ``dw_norms`` the Frobenius norm of each readout update.  For noisy targets
    ``test_mae`` is measured against the clean signal and ``test_mae_noisy``
    against the noisy one.
    """

    train_mae: float
    test_mae: float
    train_mae_channels: np.ndarray
    test_mae_channels: np.ndarray
    train_abs_error: np.ndarray
    test_abs_error: np.ndarray
    dw_norms: np.ndarray
    z_test: np.ndarray
    final_state: object = None
    test_mae_noisy: float | None = None
    diverged: bool = False
    divergence_phase: str | None = None
    divergence_step: int | None = None
    extra: dict = field(default_factory=dict)


def _run_phase(network, x, n_steps, dt, target=None, p=None, update_interval=1,
               train_reservoir=False, dw=None):
    z = np.empty((n_steps, network.k))
    injection = network.error_injection if train_reservoir else None
    done = _kernels.integrate(
        network.reservoir, network.g, network.w_feedback, network.w_readout, x, dt,
        n_steps, z, p, target, update_interval, 0, injection, dw,
    )
    return z, done


def _fit(network, target, schedule, seed, alpha, x0_scale, state, train_reservoir):
    if target.k != network.k:
        raise ValueError(f"target has {target.k} channels, network reads out {network.k}")
    net = network.copy()
    if state is None:
        state = initial_state(net.n, seed, x0_scale)
    x = state.x.copy()
    dt = schedule.dt
    nw, ntr, nte = schedule.warmup_steps, schedule.train_steps, schedule.test_steps
    start = state.step_index
    f_train = target.cyclic(ntr, start + nw)
    f_test_clean = target.cyclic(nte, start + nw + ntr, clean=True)
    n_updates = -(-ntr // schedule.update_interval)
    dw = np.zeros(n_updates)
    p = np.eye(net.n) / alpha

    def diverge(phase, offset, done, partial):
        step_index = start + offset + done + 1
        raise DivergenceError(
            f"{phase} phase diverged at step {step_index} (g={net.g}, seed={seed})",
            phase=phase, step_index=step_index, partial=partial,
        )

    _, done = _run_phase(net, x, nw, dt)
    if done < nw:
        diverge("warmup", 0, done, None)

    z_train, done = _run_phase(net, x, ntr, dt, f_train, p, schedule.update_interval,
                               train_reservoir, dw)
    if done < ntr:
        diverge("train", nw, done, z_train[:done + 1])

    z_test, done = _run_phase(net, x, nte, dt)
    if done < nte:
        diverge("test", nw + ntr, done, z_test[:done + 1])

    train_ch = channel_mae(f_train, z_train)
    test_ch = channel_mae(f_test_clean, z_test)
    noisy_mae = None
    if target.clean is not None:
        noisy_mae = float(np.mean(channel_mae(target.cyclic(nte, start + nw + ntr), z_test)))
    final = type(state)(x, state.t + schedule.total_steps * dt,
                        start + schedule.total_steps)
    trace = ErrorTrace(
        train_mae=float(np.mean(train_ch)),
        test_mae=float(np.mean(test_ch)),
        train_mae_channels=train_ch,
        test_mae_channels=test_ch,
        train_abs_error=np.mean(np.abs(f_train - z_train), axis=1),
        test_abs_error=np.mean(np.abs(f_test_clean - z_test), axis=1),
        dw_norms=dw,
        z_test=z_test,
        final_state=final,
        test_mae_noisy=noisy_mae,
    )
    net.meta = dict(net.meta, alpha=alpha, trained=True)
    return net, trace


def train_rank1(network, target, schedule=None, seed=0, alpha=1.0,
                x0_scale=DEFAULT_X0_SCALE, state=None):
    """Warm up, train the readout with feedback of the network's own output, then test.

    Returns ``(trained_copy, ErrorTrace)``; raises :class:`DivergenceError`
    tagged with the phase and global step index.
    """
    if network.architecture != "rank1":
        raise ValueError("train_rank1 needs a Rank1Network")
    return _fit(network, target, schedule or TrainingSchedule(), seed, alpha, x0_scale,
                state, train_reservoir=False)


def train_rankN(network, target, schedule=None, seed=0, alpha=1.0,
                x0_scale=DEFAULT_X0_SCALE, state=None):
    """As :func:`train_rank1`, also updating reservoir rows through ``error_injection``."""
    if network.architecture != "rankN":
        raise ValueError("train_rankN needs a RankNNetwork")
    return _fit(network, target, schedule or TrainingSchedule(), seed, alpha, x0_scale,
                state, train_reservoir=True)


def train(network, target, schedule=None, seed=0, alpha=1.0, x0_scale=DEFAULT_X0_SCALE,
          state=None):
    fn = train_rank1 if network.architecture == "rank1" else train_rankN
    return fn(network, target, schedule, seed, alpha, x0_scale, state)


def run_test(network, state, target, n_steps, dt=DEFAULT_DT, start=None):
    """Free-run a (trained) network and score it against ``target``.

    Returns ``(mae, z_trace, final_state)``; the target is read from global
    step ``start`` (default: the state's step index).
    """
    from .dynamics import evolve

    start = state.step_index if start is None else start
    final, z = evolve(network, state, n_steps, dt, phase="test")
    f = target.cyclic(n_steps, start, clean=True)
    return float(np.mean(channel_mae(f, z))), z, final
