"""Inner-loop kernels, compiled when available.

``integrate`` resolves to the Cython extension ``_core`` unless it is missing
or the environment variable ``RFORCE_KERNEL`` is set to ``python``.
``BACKEND`` names the implementation in use.
"""

import os

from . import _fallback

BACKEND = "python"
integrate = _fallback.integrate

if os.environ.get("RFORCE_KERNEL", "").lower() not in ("python", "py", "numpy"):
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None
    else:
        integrate = _core.integrate
        BACKEND = "cython"
else:
    _core = None

DIVERGENCE_LIMIT = _fallback.DIVERGENCE_LIMIT


def available_backends():
    """Names of the kernel implementations importable in this process."""
    names = ["python"]
    try:
        from . import _core as _  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


def get_integrate(backend):
    """Return the ``integrate`` function of a named backend."""
    if backend == "python":
        return _fallback.integrate
    if backend == "cython":
        from . import _core as core
        return core.integrate
    raise ValueError(f"unknown kernel backend {backend!r}")
