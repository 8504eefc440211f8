"""Error metrics and confidence intervals."""

import math

import numpy as np
from scipy import stats

CI_METHOD = "student-t"


def channel_mae(f, z):
    """Mean absolute error per channel of two ``T x K`` series."""
    f = np.asarray(f, dtype=float)
    z = np.asarray(z, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if z.ndim == 1:
        z = z[:, None]
    if f.shape != z.shape:
        raise ValueError(f"series shapes differ: {f.shape} vs {z.shape}")
    if f.shape[0] == 0:
        raise ValueError("empty series")
    return np.mean(np.abs(f - z), axis=0)


def mae(f, z):
    """``sum |f - z| / T``; multi-channel series average over channels too."""
    return float(np.mean(channel_mae(f, z)))


def confidence_interval(values, level=0.99):
    """Student-t interval on the mean: returns ``(mean, half_width)``."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("a confidence interval needs at least 2 values")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        return mean, 0.0
    t = stats.t.ppf(0.5 + level / 2, values.size - 1)
    return mean, float(t * sd / math.sqrt(values.size))
