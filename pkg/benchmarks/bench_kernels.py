"""Compare the compiled and numpy inner-loop kernels.

Times free-running (no updates) and training (RLS every ``--update-interval``
steps) integration for each available backend and checks that both produce
the same trajectory.

    python benchmarks/bench_kernels.py --n 400 1000 --steps 2000
"""

import argparse
import json
import time

import numpy as np

from rforce._kernels import available_backends, get_integrate
from rforce.dynamics import build_network, initial_state
from rforce.targets import multi_periodic


def _run(integrate, net, x0, steps, target, training, update_interval):
    M, w, x = net.reservoir.copy(), net.w_readout.copy(), x0.copy()
    z = np.empty((steps, net.k))
    P = np.eye(net.n) if training else None
    t0 = time.perf_counter()
    integrate(M, net.g, net.w_feedback, w, x, 0.1, steps, z, P,
              target if training else None, update_interval, 0, None, None)
    return time.perf_counter() - t0, z


def bench(n, steps, repeats, update_interval):
    net = build_network("rank1", "rforce", 1.5, n, 1, seed=0)
    x0 = initial_state(n, seed=0).x
    target = multi_periodic(duration=steps * 0.1).values
    rows, outputs = [], {}
    for backend in available_backends():
        integrate = get_integrate(backend)
        for training in (False, True):
            best, z = min(_run(integrate, net, x0, steps, target, training, update_interval)
                          for _ in range(repeats))
            outputs[backend, training] = z
            rows.append({"backend": backend, "n": n, "steps": steps,
                         "mode": "train" if training else "free",
                         "seconds": best, "us_per_step": 1e6 * best / steps})
    if "cython" in available_backends():
        for training in (False, True):
            diff = np.max(np.abs(outputs["cython", training] - outputs["python", training]))
            for r in rows:
                if r["mode"] == ("train" if training else "free"):
                    r["max_abs_diff"] = float(diff)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[200, 400, 1000])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--update-interval", type=int, default=2)
    ap.add_argument("--json", help="write the rows to this path")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'backend':8} {'n':>5} {'mode':5} {'us/step':>10} {'speedup':>8} {'max|dz|':>9}")
    for n in args.n:
        block = bench(n, args.steps, args.repeats, args.update_interval)
        ref = {r["mode"]: r["us_per_step"] for r in block if r["backend"] == "python"}
        for r in block:
            r["speedup"] = ref[r["mode"]] / r["us_per_step"]
            print(f"{r['backend']:8} {n:5d} {r['mode']:5} {r['us_per_step']:10.1f} "
                  f"{r['speedup']:7.1f}x {r.get('max_abs_diff', float('nan')):9.1e}")
        rows += block
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
