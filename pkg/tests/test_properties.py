"""Property-based checks of the structural invariants (N <= 512)."""

import tempfile
from pathlib import Path

import numpy as np
from hypothesis import given, settings, strategies as st

from rforce import _kernels
from rforce.checkpoint import load_checkpoint, save_checkpoint
from rforce.diagnostics import jacobian
from rforce.dynamics import NetworkState, build_network, initial_state, step
from rforce.spectral_init import (
    INIT_KINDS, _largest_remainder, generate_orthogonal_basis, make_reservoir, plan_ablation,
    plan_rforce, sample_plan_eigenvalues,
)
from rforce.targets import episodes_series, multi_periodic
from rforce.training import RlsTrainer, rls_update

seeds = st.integers(0, 2**32 - 1)
gains = st.floats(1.0, 2.0)
even_n = st.integers(1, 256).map(lambda h: 2 * h)
spectral_kinds = st.sampled_from([k for k in INIT_KINDS if k != "normal"])


@given(n=st.sampled_from([2, 8, 64, 200, 512]), seed=seeds)
@settings(max_examples=12)
def test_basis_orthogonal(n, seed):
    assert generate_orthogonal_basis(n, seed).orthogonality_defect() <= 1e-8


@given(kind=spectral_kinds, g=gains, n=even_n, seed=seeds)
def test_conjugate_closure(kind, g, n, seed):
    plan = plan_rforce(g, n) if kind == "rforce" else plan_ablation(kind, g, n)
    upper, _ = sample_plan_eigenvalues(plan, seed)
    full = np.concatenate([upper, upper.conj()])
    assert full.size == n
    assert np.allclose(np.sort_complex(full), np.sort_complex(full.conj()))


@given(kind=spectral_kinds, g=gains, half=st.integers(1, 64), seed=seeds)
@settings(max_examples=15)
def test_assembled_spectrum_matches_plan(kind, g, half, seed):
    n = 2 * half
    res = make_reservoir(kind, g, n, seed)
    planned = np.sort_complex(res.eigenvalues)
    got = np.sort_complex(np.linalg.eigvals(res.entries))
    # the assembled matrix is real, so its spectrum must be conjugate-closed
    assert np.isrealobj(res.entries)
    assert np.allclose(np.sort(np.abs(got)), np.sort(np.abs(planned)), atol=1e-6)


@given(fracs=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda f: sum(f) > 0),
       total=st.integers(0, 5000))
def test_largest_remainder_sums(fracs, total):
    f = np.array(fracs) / sum(fracs)
    counts = _largest_remainder(f, total)
    assert sum(counts) == total
    assert all(abs(c - x * total) < 1 for c, x in zip(counts, f))


@given(n=st.integers(2, 40), k=st.integers(1, 3), updates=st.integers(1, 200), seed=seeds)
def test_rls_p_symmetric_psd(n, k, updates, seed):
    rng = np.random.default_rng(seed)
    t = RlsTrainer.create(n, alpha=rng.uniform(0.1, 10), phase="train")
    w = np.zeros((n, k))
    for _ in range(updates):
        r = np.tanh(rng.normal(size=n))
        t, w = rls_update(t, r, rng.normal(size=k) * 0.1, w)
    p = t.p_matrix
    assert np.max(np.abs(p - p.T)) <= 1e-8
    probes = rng.normal(size=(10, n))
    assert np.all(np.einsum("ij,jk,ik->i", probes, p, probes) >= -1e-12)


@given(n=st.sampled_from([16, 100, 400]), interval=st.integers(1, 4), seed=seeds)
@settings(max_examples=10)
def test_kernel_p_symmetric(n, interval, seed):
    net = build_network("rank1", "rforce", 1.5, n, 1, seed % 1000)
    P = np.eye(n)
    steps = 2000
    f = multi_periodic(duration=steps * 0.1).values
    _kernels.integrate(net.reservoir, net.g, net.w_feedback, net.w_readout.copy(),
                       initial_state(n, seed).x, 0.1, steps, np.empty((steps, 1)), P, f, interval)
    assert np.max(np.abs(P - P.T)) <= 1e-8


@given(arch=st.sampled_from(["rank1", "rankN"]), kind=st.sampled_from(INIT_KINDS),
       g=gains, half=st.integers(1, 40), seed=seeds)
@settings(max_examples=15)
def test_build_deterministic(arch, kind, g, half, seed):
    a = build_network(arch, kind, g, 2 * half, 2, seed)
    b = build_network(arch, kind, g, 2 * half, 2, seed)
    assert np.array_equal(a.reservoir, b.reservoir)
    assert np.array_equal(a.w_readout, b.w_readout)
    fa = a.w_feedback if arch == "rank1" else a.error_injection
    fb = b.w_feedback if arch == "rank1" else b.error_injection
    assert np.array_equal(fa, fb)


@given(arch=st.sampled_from(["rank1", "rankN"]), half=st.integers(1, 60),
       k=st.integers(1, 4), seed=seeds)
@settings(max_examples=15)
def test_checkpoint_round_trip(arch, half, k, seed):
    net = build_network(arch, "rforce", 1.5, 2 * half, k, seed)
    net.w_readout[:] = np.random.default_rng(seed).normal(size=net.w_readout.shape)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "c.ckpt"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
    assert np.array_equal(back.reservoir, net.reservoir)
    assert np.array_equal(back.w_readout, net.w_readout)
    assert back.g == net.g and back.architecture == net.architecture


@given(seed=seeds, scale=st.floats(0.01, 3.0))
@settings(max_examples=10)
def test_fd_jacobian(seed, scale):
    rng = np.random.default_rng(seed)
    net = build_network("rank1", "normal", 1.5, 32, 1, seed % 1000)
    net.w_readout[:] = rng.normal(size=(32, 1)) * 0.3
    x = rng.normal(size=32) * scale
    base = step(net, NetworkState(x)).x
    h = 1e-6
    fd = np.column_stack([(step(net, NetworkState(x + h * e)).x - base) / h for e in np.eye(32)])
    exact = np.eye(32) + 0.1 * jacobian(net, NetworkState(x))
    assert np.linalg.norm(fd - exact) / np.linalg.norm(exact) < 1e-4


@given(frames=st.integers(2, 30), channels=st.integers(1, 8), seed=seeds)
def test_normalization_round_trip(frames, channels, seed):
    from rforce.targets import denormalize
    raw = np.random.default_rng(seed).normal(size=(frames, channels)) * 50 + 3
    s = episodes_series(raw, 1, "x")
    assert s.values.min() >= -1 and s.values.max() <= 1
    assert np.allclose(denormalize(s).values, raw, rtol=0, atol=1e-12 * np.abs(raw).max())
