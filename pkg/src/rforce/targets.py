"""Target time series: periodic generators and 66-channel motion CSVs."""

import csv
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .seeding import substream

DEFAULT_BASE_PERIOD = 120.0
MOTION_CHANNELS = 66
#: Network time per motion frame (one frame per integration step at dt=0.1).
MOTION_FRAME_DT = 0.1


class TargetFormatError(ValueError):
    """Malformed motion CSV."""


@dataclass
class TargetSeries:
    """``T x K`` target values sampled every ``dt`` time units.

    ``normalization`` holds per-channel ``(offset, scale)`` arrays such that
    ``original = offset + scale * values``.  ``clean`` is the noise-free copy
    of a noisy series.  ``params`` records the generator settings.
    """

    values: np.ndarray
    dt: float
    name: str
    normalization: tuple | None = None
    clean: np.ndarray | None = None
    degenerate: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError(f"target needs at least 2 time steps, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("target values must be finite")
        self.values = np.ascontiguousarray(v)
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n_steps(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]

    def cyclic(self, n_steps, start=0, clean=False):
        """``n_steps`` rows starting at ``start``, wrapping around the end."""
        src = self.clean if clean and self.clean is not None else self.values
        idx = (start + np.arange(n_steps)) % src.shape[0]
        return np.ascontiguousarray(src[idx])


def _time_grid(n_steps, dt, period):
    steps_per_period = period / dt
    whole = round(steps_per_period)
    if abs(steps_per_period - whole) < 1e-9:
        # exact periodicity on the grid
        return (np.arange(n_steps) % whole) * dt
    return np.arange(n_steps) * dt


def _n_steps(duration, dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(round(duration / dt))
    if n < 2:
        raise ValueError(f"duration {duration} with dt {dt} gives fewer than 2 steps")
    return n


def _harmonic_sum(t, amplitudes, period, phase=0.0):
    return sum(a * np.sin(2 * np.pi * (j + 1) * t / period + phase)
               for j, a in enumerate(amplitudes))


def multi_periodic(n_sines=4, base_period=DEFAULT_BASE_PERIOD, amplitudes=None,
                   duration=2100.0, dt=0.1, phase=0.0):
    """Sum of harmonics ``a_k sin(2 pi k t / base_period)``, k = 1..n_sines.

    Defaults ``a_k = 1/k``; the result is scaled so that its maximum
    magnitude over one period is 1.
    """
    if n_sines < 1:
        raise ValueError("n_sines must be >= 1")
    if amplitudes is None:
        amplitudes = [1.0 / k for k in range(1, n_sines + 1)]
    amplitudes = [float(a) for a in amplitudes]
    if len(amplitudes) != n_sines:
        raise ValueError(f"expected {n_sines} amplitudes, got {len(amplitudes)}")
    if not base_period > 0:
        raise ValueError("base_period must be positive")
    n = _n_steps(duration, dt)
    one_period = _time_grid(max(round(base_period / dt), 2), dt, base_period)
    peak = np.max(np.abs(_harmonic_sum(one_period, amplitudes, base_period, phase)))
    if peak == 0:
        raise ValueError("amplitudes produce an identically zero signal")
    values = _harmonic_sum(_time_grid(n, dt, base_period), amplitudes, base_period, phase) / peak
    params = {"kind": "multi_periodic", "n_sines": n_sines, "base_period": base_period,
              "amplitudes": amplitudes, "duration": duration, "dt": dt, "phase": phase}
    return TargetSeries(values, dt, "multiperiodic", params=params)


def discontinuous(base_period=DEFAULT_BASE_PERIOD, duty_pattern=None, duration=2100.0,
                  dt=0.1, level=0.8):
    """Square-like wave: sign of the multi-periodic generator times ``level``.

    ``duty_pattern`` gives the generator amplitudes (default 1/k for four
    harmonics).  A step whose neighbours straddle a sign change takes the
    midpoint value 0, a one-step ramp.
    """
    amplitudes = duty_pattern if duty_pattern is not None else [1.0 / k for k in range(1, 5)]
    amplitudes = [float(a) for a in amplitudes]
    n = _n_steps(duration, dt)
    # one extra leading sample so index 0 sees its (periodic) predecessor
    steps = round(base_period / dt)
    if abs(base_period / dt - steps) < 1e-9:
        t = ((np.arange(n + 1) - 1) % steps) * dt
    else:
        t = (np.arange(n + 1) - 1) * dt
    sign = np.where(_harmonic_sum(t, amplitudes, base_period) >= 0, 1.0, -1.0)
    values = level * sign[1:]
    values[sign[1:] != sign[:-1]] = 0.0
    params = {"kind": "discontinuous", "base_period": base_period,
              "duty_pattern": list(amplitudes), "duration": duration, "dt": dt, "level": level}
    return TargetSeries(values, dt, "discontinuous", params=params)


def noisy(base, sigma, seed):
    """``base`` plus i.i.d. N(0, sigma^2) noise; the clean copy is kept."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    clean = base.values.copy()
    noise = substream(seed, "noise").standard_normal(clean.shape) * sigma
    params = dict(base.params, noise_sigma=sigma, noise_seed=int(seed))
    return replace(base, values=clean + noise, clean=clean, name=f"{base.name}+noise",
                   params=params)


def normalize_channels(raw):
    """Per-channel min-max map to [-1, 1].

    Returns ``(values, offset, scale, degenerate)``; constant channels map to
    0 with scale 1 and are flagged degenerate.
    """
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    degenerate = hi == lo
    offset = np.where(degenerate, lo, 0.5 * (hi + lo))
    scale = np.where(degenerate, 1.0, 0.5 * (hi - lo))
    values = np.clip((raw - offset) / scale, -1.0, 1.0)
    return values, offset, scale, degenerate


def denormalize(series):
    """Map a normalized series back to its original units."""
    if series.normalization is None:
        raise RuntimeError(f"series {series.name!r} carries no normalization metadata")
    offset, scale = series.normalization
    values = offset + scale * series.values
    return replace(series, values=values, normalization=None, clean=None)


def _read_motion_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            rows.append((i + 1, row))
    if not rows:
        raise TargetFormatError(f"{path}: no data rows")

    def numeric(cells):
        try:
            [float(c) for c in cells]
        except ValueError:
            return False
        return True

    if not numeric(rows[0][1]):
        rows = rows[1:]  # header
    data = []
    for line, row in rows:
        if len(row) != MOTION_CHANNELS:
            raise TargetFormatError(
                f"{path}: row {line} has {len(row)} columns, expected {MOTION_CHANNELS}"
            )
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise TargetFormatError(f"{path}: row {line} has a non-numeric cell ({exc})") from exc
    if len(data) < 1:
        raise TargetFormatError(f"{path}: no data rows")
    arr = np.asarray(data)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise TargetFormatError(f"{path}: row {rows[bad][0]} has a non-finite value")
    return arr


def episodes_series(raw, episodes, name, dt=MOTION_FRAME_DT, params=None):
    """Normalize a ``T x K`` recording and repeat it ``episodes`` times."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    values, offset, scale, degenerate = normalize_channels(raw)
    tiled = np.tile(values, (int(episodes), 1))
    p = {"episodes": int(episodes), "frames_per_episode": int(values.shape[0])}
    p.update(params or {})
    return TargetSeries(tiled, dt, name, (offset, scale), degenerate=degenerate, params=p)


def load_motion_csv(path, episodes=15, dt=MOTION_FRAME_DT):
    """66-column joint-coordinate CSV (optional header), normalized and repeated."""
    raw = _read_motion_rows(path)
    return episodes_series(raw, episodes, f"motion:{path}", dt,
                           {"kind": "motion_csv", "path": str(path)})


def synthetic_motion(n_frames=300, channels=MOTION_CHANNELS, period_frames=300, seed=0):
    """Stand-in motion recording: phase-shifted multi-periodic channels.

    By default one episode holds one full cycle, like a single recorded
    repetition of an exercise.  Returns raw ``n_frames x channels`` data in
    arbitrary units (random offsets and scales per channel) so the
    normalization path is exercised.
    """
    rng = substream(seed, "target")
    t = np.arange(n_frames, dtype=float)
    phases = rng.uniform(0, 2 * np.pi, channels)
    amps = rng.uniform(0.3, 1.0, (channels, 4)) / np.arange(1, 5)
    offsets = rng.uniform(-1.0, 1.0, channels)
    scales = rng.uniform(0.1, 2.0, channels)
    raw = np.empty((n_frames, channels))
    for c in range(channels):
        raw[:, c] = offsets[c] + scales[c] * _harmonic_sum(t, amps[c], period_frames, phases[c])
    return raw


def save_target_csv(series, path, header=True):
    """Write the series values as CSV (one column per channel)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"c{j}" for j in range(series.k)])
        for row in series.values:
            w.writerow([repr(float(v)) for v in row])


def make_target(name, duration, dt=0.1, base_period=DEFAULT_BASE_PERIOD, n_sines=4,
                sigma=0.1, seed=0):
    """Named one-dimensional target family used by the CLI and sweeps."""
    if name == "multiperiodic":
        return multi_periodic(n_sines, base_period, duration=duration, dt=dt)
    if name == "discontinuous":
        return discontinuous(base_period, duration=duration, dt=dt)
    if name == "noisy":
        return noisy(multi_periodic(n_sines, base_period, duration=duration, dt=dt), sigma, seed)
    raise ValueError(f"unknown target {name!r}; expected multiperiodic, discontinuous or noisy")


def period_steps(series):
    period = series.params.get("base_period")
    if period is None:
        return None
    return int(round(period / series.dt)) if math.isfinite(period) else None
