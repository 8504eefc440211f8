"""Per-purpose random substreams derived from one master seed.

Every random draw in the library goes through :func:`substream`, which keys a
counter-based Philox generator on ``(seed, purpose, *extra)``.  Streams are
therefore independent of call order: sampling the feedback weights before or
after the reservoir gives the same numbers.
"""

import zlib

import numpy as np

PURPOSES = (
    "reservoir",
    "feedback",
    "basis",
    "angles",
    "initial_state",
    "injection",
    "noise",
    "trial",
    "target",
)


def _purpose_code(purpose):
    if purpose not in PURPOSES:
        raise ValueError(f"unknown random stream purpose {purpose!r}")
    return zlib.crc32(purpose.encode("ascii"))


def substream(seed, purpose, *extra):
    """Generator for ``purpose`` derived from integer ``seed``.

    ``extra`` integers further split the stream (e.g. a trial index).
    """
    if isinstance(seed, (bool, np.bool_)) or int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    key = (_purpose_code(purpose),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, purpose, *extra):
    """A 63-bit integer seed derived from ``seed`` for a named purpose."""
    rng = substream(seed, purpose, *extra)
    return int(rng.integers(0, 2**63 - 1))
