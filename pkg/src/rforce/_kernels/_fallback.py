"""Pure-numpy version of the Forward-Euler / RLS inner loop.

Same signature and semantics as the compiled ``_core.integrate``; used when
the extension is not built or ``RFORCE_KERNEL=python`` is set.
"""

import numpy as np

DIVERGENCE_LIMIT = 1e6


def integrate(M, g, w_feedback, w_readout, x, dt, n_steps, z_out,
              P=None, target=None, update_interval=1, phase_offset=0,
              injection=None, dw_out=None):
    """Advance ``x`` in place by ``n_steps`` Forward-Euler steps.

    Per step: ``r = tanh(x)``, ``z = w_readout.T @ r`` (written to
    ``z_out[step]``); when ``P`` is given and the step falls on the update
    grid, one RLS update of ``P`` and ``w_readout`` (and of ``M`` through
    ``injection``); finally ``x += dt * (-x + g * M @ r + w_feedback @ z)``
    with the pre-update ``z``.

    Returns the number of steps completed before a divergence, which equals
    ``n_steps`` for a clean run.  ``M``, ``w_readout``, ``x`` and ``P`` are
    modified in place.
    """
    training = P is not None
    n_updates = 0
    for step in range(n_steps):
        r = np.tanh(x)
        z = w_readout.T @ r
        z_out[step] = z

        if training and (phase_offset + step) % update_interval == 0:
            k = P @ r
            rpr = r @ k
            c = 1.0 / (1.0 + rpr)
            P -= c * np.outer(k, k)
            k *= c
            err = z - target[step]
            w_readout -= np.outer(k, err)
            if injection is not None:
                M -= np.outer(injection @ err, k)
            if dw_out is not None and n_updates < dw_out.shape[0]:
                dw_out[n_updates] = np.sqrt((k @ k) * (err @ err))
            n_updates += 1
            if not (np.isfinite(rpr) and np.all(np.isfinite(err))):
                return step

        drive = g * (M @ r)
        if w_feedback is not None:
            drive += w_feedback @ z
        x += dt * (-x + drive)
        if not np.all(np.abs(x) <= DIVERGENCE_LIMIT):
            return step
    return n_steps
