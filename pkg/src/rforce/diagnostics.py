"""State Jacobian, its spectrum, and Forward-Euler stability bookkeeping.

An eigenvalue ``lam`` of the Jacobian is inside the Forward-Euler stability
disk (centre ``-1/dt``, radius ``1/dt``) iff ``|1 + dt * lam| < 1``.
"""

import csv
from dataclasses import dataclass
import json

import numpy as np

from . import _kernels
from .dynamics import DEFAULT_X0_SCALE, initial_state


@dataclass
class JacobianSnapshot:
    eigenvalues: np.ndarray
    t: float
    phase: str
    n_outside_fe: int
    max_fe_excess: float
    n_outside_unit: int = 0
    step_index: int = 0
    diverged: bool = False


def jacobian(network, state):
    """``-I + (g M + w_f w^T) diag(1 - tanh(x)^2)``; no feedback term for RankN."""
    deriv = 1.0 - np.tanh(state.x) ** 2
    coupling = network.g * network.reservoir
    if network.w_feedback is not None:
        coupling = coupling + network.w_feedback @ network.w_readout.T
    jac = coupling * deriv[None, :]
    jac[np.diag_indices_from(jac)] -= 1.0
    return jac


def combined_matrix(network):
    """Reservoir bordered by the feedback column(s) and readout row(s)."""
    if network.w_feedback is None:
        raise ValueError("combined matrix needs a Rank1 network with feedback")
    n, k = network.n, network.k
    out = np.zeros((n + k, n + k))
    out[:n, :n] = network.reservoir
    out[:n, n:] = network.w_feedback
    out[n:, :n] = network.w_readout.T
    return out


def stability_metrics(eigenvalues, dt):
    """Returns ``(n_outside_fe, max_fe_excess, n_outside_unit)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    lam = np.asarray(eigenvalues, dtype=complex)
    amp = np.abs(1.0 + dt * lam)
    excess = float(np.max(amp) - 1.0) if lam.size else float("-inf")
    return int(np.sum(amp > 1.0)), excess, int(np.sum(np.abs(lam) > 1.0))


def spectrum(matrix):
    """Eigenvalues of a dense real matrix (general nonsymmetric solver)."""
    return np.linalg.eigvals(np.asarray(matrix, dtype=float))


def snapshot(network, state, dt, phase):
    eig = spectrum(jacobian(network, state))
    n_out, excess, n_unit = stability_metrics(eig, dt)
    return JacobianSnapshot(eig, state.t, phase, n_out, excess, n_unit, state.step_index)


def snapshot_run(network, schedule, cadence=50, target=None, seed=0, training=True,
                 alpha=1.0, x0_scale=DEFAULT_X0_SCALE, state=None):
    """Evolve (and train) a copy of ``network``, snapshotting the Jacobian spectrum.

    A snapshot is taken at the start of every phase, every ``cadence`` steps
    within it, and once at the end of the run.  Phases are labelled ``none`` (warm-up, or the whole
    run when ``training`` is false), ``train`` and ``test``.  A divergence
    ends the run with a flagged terminal snapshot.
    """
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    if training and target is None:
        raise ValueError("training snapshots need a target")
    net = network.copy()
    if state is None:
        state = initial_state(net.n, seed, x0_scale)
    state = state.copy()
    dt = schedule.dt
    p = np.eye(net.n) / alpha if training else None
    injection = net.error_injection if (training and net.architecture == "rankN") else None
    phases = [("none", schedule.warmup_steps, False),
              ("train" if training else "none", schedule.train_steps, training),
              ("test" if training else "none", schedule.test_steps, False)]
    snaps = []
    for label, n_steps, updating in phases:
        done_in_phase = 0
        while done_in_phase < n_steps:
            snaps.append(snapshot(net, state, dt, label))
            chunk = min(cadence, n_steps - done_in_phase)
            z = np.empty((chunk, net.k))
            f = target.cyclic(chunk, state.step_index) if updating else None
            done = _kernels.integrate(
                net.reservoir, net.g, net.w_feedback, net.w_readout, state.x, dt, chunk, z,
                p if updating else None, f, schedule.update_interval, done_in_phase,
                injection if updating else None, None,
            )
            state.step_index += done
            state.t = state.step_index * dt
            if done < chunk:
                snaps.append(JacobianSnapshot(np.full(net.n, np.nan + 0j), state.t, label,
                                              net.n, float("inf"), net.n, state.step_index,
                                              diverged=True))
                return snaps
            done_in_phase += chunk
    snaps.append(snapshot(net, state, dt, phases[-1][0]))
    return snaps


def write_spectrum_csv(snapshots, path):
    """One row per eigenvalue: ``re,im,t,phase``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "t", "phase"])
        for s in snapshots:
            for lam in s.eigenvalues:
                w.writerow([repr(float(lam.real)), repr(float(lam.imag)), repr(float(s.t)), s.phase])


def snapshot_summary(snapshots, dt):
    return {
        "dt": dt,
        "criterion": "|1 + dt*lambda| > 1",
        "t": [s.t for s in snapshots],
        "phase": [s.phase for s in snapshots],
        "n_outside_fe": [s.n_outside_fe for s in snapshots],
        "max_fe_excess": [s.max_fe_excess for s in snapshots],
        "n_outside_unit": [s.n_outside_unit for s in snapshots],
        "diverged": any(s.diverged for s in snapshots),
    }


def write_snapshot_summary(snapshots, dt, path):
    with open(path, "w") as fh:
        json.dump(snapshot_summary(snapshots, dt), fh, indent=2)

