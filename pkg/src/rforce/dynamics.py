"""Rank1 / RankN random recurrent networks under Forward Euler.

Units follow ``dx/dt = -x + g M tanh(x) + w_f z`` with time constant 1, and
the readout is ``z = w^T tanh(x)``.  The RankN variant has no feedback
loop; its reservoir is trained instead.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .seeding import substream
from .spectral_init import make_reservoir, sample_feedback

DEFAULT_DT = 0.1
DEFAULT_X0_SCALE = 0.5
DIVERGENCE_LIMIT = _kernels.DIVERGENCE_LIMIT


class DivergenceError(FloatingPointError):
    """Network state left the finite range ``|x_i| <= 1e6``."""

    def __init__(self, message, phase=None, step_index=None, partial=None):
        super().__init__(message)
        self.phase = phase
        self.step_index = step_index
        self.partial = partial


def _as_matrix(a, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass
class Rank1Network:
    """Fixed reservoir and feedback; only ``w_readout`` is trained.

    ``reservoir`` is the unit-gain matrix M; the dynamics use ``g * M``.
    """

    reservoir: np.ndarray
    g: float
    w_feedback: np.ndarray
    w_readout: np.ndarray
    init_kind: str = "normal"
    meta: dict = field(default_factory=dict)

    architecture = "rank1"

    def __post_init__(self):
        self.reservoir = _as_matrix(self.reservoir, "reservoir")
        self.w_feedback = _as_matrix(self.w_feedback, "w_feedback")
        self.w_readout = _as_matrix(self.w_readout, "w_readout")
        n = self.reservoir.shape[0]
        if self.reservoir.shape != (n, n):
            raise ValueError("reservoir must be square")
        if self.w_feedback.shape != self.w_readout.shape or self.w_readout.shape[0] != n:
            raise ValueError(
                f"feedback {self.w_feedback.shape} and readout {self.w_readout.shape} "
                f"must both be ({n}, k)"
            )
        self.g = float(self.g)

    @property
    def n(self):
        return self.reservoir.shape[0]

    @property
    def k(self):
        return self.w_readout.shape[1]

    def copy(self):
        return replace(
            self,
            reservoir=self.reservoir.copy(),
            w_feedback=self.w_feedback.copy(),
            w_readout=self.w_readout.copy(),
            meta=dict(self.meta),
        )


@dataclass
class RankNNetwork:
    """Trainable reservoir and readout, no feedback loop.

    ``error_injection`` (N x K, fixed) routes the readout error to the rows
    of the reservoir during training.
    """

    reservoir: np.ndarray
    g: float
    w_readout: np.ndarray
    error_injection: np.ndarray
    init_kind: str = "normal"
    meta: dict = field(default_factory=dict)

    architecture = "rankN"
    w_feedback = None

    def __post_init__(self):
        self.reservoir = _as_matrix(self.reservoir, "reservoir")
        self.w_readout = _as_matrix(self.w_readout, "w_readout")
        self.error_injection = _as_matrix(self.error_injection, "error_injection")
        n = self.reservoir.shape[0]
        if self.reservoir.shape != (n, n):
            raise ValueError("reservoir must be square")
        if self.error_injection.shape != self.w_readout.shape or self.w_readout.shape[0] != n:
            raise ValueError(
                f"injection {self.error_injection.shape} and readout {self.w_readout.shape} "
                f"must both be ({n}, k)"
            )
        self.g = float(self.g)

    @property
    def n(self):
        return self.reservoir.shape[0]

    @property
    def k(self):
        return self.w_readout.shape[1]

    def copy(self):
        return replace(
            self,
            reservoir=self.reservoir.copy(),
            w_readout=self.w_readout.copy(),
            error_injection=self.error_injection.copy(),
            meta=dict(self.meta),
        )


@dataclass
class NetworkState:
    x: np.ndarray
    t: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.x)):
            raise DivergenceError("network state has non-finite components",
                                  step_index=self.step_index)

    def copy(self):
        return NetworkState(self.x.copy(), self.t, self.step_index)


def build_network(architecture, init_kind, g, n, k, seed, p=0.1, m=4):
    """Freshly initialised network with zero readout weights.

    Spectral reservoirs (R-FORCE and ablations) are stored divided by ``g`` so
    that the effective matrix ``g * M`` carries the planned spectrum.
    """
    res = make_reservoir(init_kind, g, n, seed, p=p, m=m)
    reservoir = res.entries if init_kind == "normal" else res.entries / g
    readout = np.zeros((n, k))
    meta = {"seed": int(seed), "p": p, "m": m}
    if architecture == "rank1":
        return Rank1Network(reservoir, g, sample_feedback(n, k, seed), readout, init_kind, meta)
    if architecture.lower() == "rankn":
        injection = substream(seed, "injection").uniform(-1.0, 1.0, size=(n, k))
        return RankNNetwork(reservoir, g, readout, injection, init_kind, meta)
    raise ValueError(f"unknown architecture {architecture!r}; expected 'rank1' or 'rankN'")


def initial_state(n, seed, scale=DEFAULT_X0_SCALE):
    """i.i.d. normal activations with standard deviation ``scale``."""
    return NetworkState(scale * substream(seed, "initial_state").standard_normal(n))


def activate(state):
    return np.tanh(state.x)


def readout(network, state):
    return network.w_readout.T @ activate(state)


def step(network, state, dt=DEFAULT_DT):
    """One Forward-Euler step; the feedback uses the pre-step readout."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    r = activate(state)
    drive = network.g * (network.reservoir @ r)
    if network.w_feedback is not None:
        drive += network.w_feedback @ (network.w_readout.T @ r)
    x = state.x + dt * (-state.x + drive)
    if not np.all(np.abs(x) <= DIVERGENCE_LIMIT):
        raise DivergenceError(
            f"state diverged at step {state.step_index + 1}", step_index=state.step_index + 1
        )
    return NetworkState(x, state.t + dt, state.step_index + 1)


def evolve(network, state, n_steps, dt=DEFAULT_DT, phase=None):
    """Run ``n_steps`` untrained steps; returns ``(new_state, z_trace)``.

    ``z_trace[i]`` is the readout at the state before step ``i``.
    """
    x = state.x.copy()
    z = np.empty((n_steps, network.k))
    done = _kernels.integrate(network.reservoir, network.g, network.w_feedback,
                              network.w_readout, x, dt, n_steps, z)
    if done < n_steps:
        raise DivergenceError(
            f"state diverged at step {state.step_index + done + 1}",
            phase=phase, step_index=state.step_index + done + 1, partial=z[:done + 1],
        )
    return NetworkState(x, state.t + n_steps * dt, state.step_index + n_steps), z
