import numpy as np
import pytest

from conftest import load_oracle
from rforce.spectral_init import (
    ABLATION_KINDS, OrthogonalBasis, ReservoirMatrix, SpectrumPlan, Arc, antisymmetric_source,
    assemble_reservoir, block_form, density_fractions, generate_orthogonal_basis,
    make_reservoir, plan_ablation, plan_rforce, rforce_angles, sample_feedback,
    sample_normal_reservoir, sample_plan_eigenvalues,
)


def sorted_eigs(values):
    values = np.asarray(values)
    return values[np.lexsort((np.round(values.imag, 9), np.round(values.real, 9)))]


def match_error(a, b):
    """Greedy nearest matching; robust to ordering ties."""
    b = list(b)
    worst = 0.0
    for lam in a:
        j = int(np.argmin(np.abs(np.asarray(b) - lam)))
        worst = max(worst, abs(b.pop(j) - lam))
    return worst


class TestNormalReservoir:
    def test_moments(self):
        m = sample_normal_reservoir(1000, 0.1, seed=7).entries
        nz = m[m != 0]
        assert 0.09 <= nz.size / m.size <= 0.11
        assert abs(nz.std() / 0.1 - 1) < 0.1

    def test_dense_two_by_two(self):
        res = sample_normal_reservoir(2, 1.0, seed=0)
        assert res.entries.shape == (2, 2)
        assert np.all(np.isfinite(res.entries))
        assert res.init_kind == "normal"

    def test_deterministic(self):
        a = sample_normal_reservoir(1000, 0.1, seed=7).entries
        b = sample_normal_reservoir(1000, 0.1, seed=7).entries
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("n, p", [(1, 0.1), (10, 0.0), (10, 1.5), (2.5, 0.1)])
    def test_rejects_bad_arguments(self, n, p):
        with pytest.raises(ValueError):
            sample_normal_reservoir(n, p, seed=0)


class TestFeedback:
    def test_uniform(self):
        w = sample_feedback(1000, 1, seed=3)
        assert np.all((w > -1) & (w < 1))
        assert abs(w.mean()) < 0.1

    def test_shape_and_determinism(self):
        assert sample_feedback(4, 66, seed=1).shape == (4, 66)
        assert np.array_equal(sample_feedback(4, 66, 1), sample_feedback(4, 66, 1))

    def test_independent_of_reservoir_stream(self):
        assert not np.allclose(sample_feedback(50, 1, 3)[:, 0],
                               sample_normal_reservoir(50, 1.0, 3).entries[:, 0])


class TestBasis:
    def test_orthogonal_n256(self):
        basis = generate_orthogonal_basis(256, seed=5)
        assert basis.orthogonality_defect() <= 1e-8

    def test_two_by_two(self):
        v = generate_orthogonal_basis(2, seed=0).columns
        assert abs(abs(np.linalg.det(v)) - 1) <= 1e-12

    def test_reassembles_source(self):
        n = 64
        basis = generate_orthogonal_basis(n, seed=3)
        source = antisymmetric_source(n, seed=3)
        # the source's own spectrum is +-i beta
        rebuilt = block_form(basis, 1j * basis.beta)
        assert np.max(np.abs(rebuilt - source)) <= 1e-8

    def test_pairing_covers_columns(self):
        basis = generate_orthogonal_basis(10, seed=1)
        assert sorted(c for pair in basis.pairing for c in pair) == list(range(10))

    def test_odd_rejected(self):
        with pytest.raises(ValueError):
            generate_orthogonal_basis(7, seed=0)

    def test_degenerate_pairs_repaired(self):
        # a repeated beta must still leave an orthonormal basis
        basis = generate_orthogonal_basis(8, seed=2)
        cols = basis.columns.copy()
        cols[:, 2] = cols[:, 0] + 1e-3 * cols[:, 2]
        bad = OrthogonalBasis(cols, basis.pairing, np.array([1.0, 1.0, 2.0, 3.0]))
        from rforce.spectral_init import _repair_degenerate_pairs
        _repair_degenerate_pairs(bad)
        assert bad.orthogonality_defect() < 1e-12


class TestPlanRforce:
    def test_g15(self):
        plan = plan_rforce(1.5, 1000)
        assert np.allclose(plan.radii, [1.05, 1.08, 1.35, 1.8])
        assert np.allclose(plan.fractions, [0.3381, 0.4830, 0.1690, 0.01], atol=1e-4)
        arcs = plan.arcs
        assert (arcs[3].theta_min_deg, arcs[3].theta_max_deg) == (60.0, 120.0)
        assert sum(plan.counts) == 500

    def test_g12(self):
        plan = plan_rforce(1.2, 1000)
        assert np.allclose(plan.radii, [0.84, 0.864, 1.08, 1.44])
        assert np.allclose(plan.fractions, [0.1319, 0.1430, 0.5841, 0.1410], atol=1e-4)
        assert (plan.arcs[3].theta_min_deg, plan.arcs[3].theta_max_deg) == (0.0, 60.0)

    def test_weights_at_g15(self):
        # l_i = g^2 / |r_i - 1.15| on the three uncapped arcs
        radii = np.array([0.7, 0.72, 0.9, 1.2]) * 1.5
        l = 1.5**2 / np.abs(radii[:3] - 1.15)
        assert np.allclose(l, [22.5, 32.1429, 11.25], atol=1e-4)

    def test_counts_match_frozen_oracle(self):
        oracle = load_oracle("density_counts_n1000.json")
        for g, row in oracle.items():
            plan = plan_rforce(float(g), 1000)
            assert list(plan.counts) == row["counts"], g
            assert np.allclose(plan.radii, row["radii"])

    @pytest.mark.parametrize("g", np.round(np.arange(1.0, 2.01, 0.1), 1))
    def test_threshold_rule(self, g):
        plan = plan_rforce(g, 1000)
        uncapped = all(c > 0 for c in plan.counts) and plan.fractions[-1] != 0.01
        assert (max(plan.radii) <= 1.55) == uncapped

    def test_angles_switch(self):
        assert rforce_angles(1.79)[:3] == [(60, 120), (120, 180), (0, 60)]
        assert rforce_angles(1.8)[:3] == [(72, 144), (0, 72), (144, 180)]
        assert rforce_angles(1.39)[3] == (0, 60)
        assert rforce_angles(1.4)[3] == (60, 120)

    def test_denominator_floor(self):
        # 0.9 * g hits the pivot at g = 1.2777...
        f = density_fractions(np.array([0.7, 0.72, 0.9, 1.2]) * (1.15 / 0.9), 1.15 / 0.9)
        assert np.all(np.isfinite(f)) and abs(sum(f) - 1) < 1e-12

    @pytest.mark.parametrize("g", [0.0, -1.0, float("nan")])
    def test_rejects_bad_gain(self, g):
        with pytest.raises(ValueError):
            plan_rforce(g, 100)


class TestAblations:
    def test_one_circle(self):
        plan = plan_ablation("one-circle", 1.5, 100)
        assert len(plan.arcs) == 1
        arc = plan.arcs[0]
        assert (arc.radius, arc.count, arc.theta_min_deg, arc.theta_max_deg) == (1.5, 50, 0, 180)

    def test_four_uniform(self):
        plan = plan_ablation("four-uniform", 1.0, 1000, m=4)
        assert max(plan.radii) == pytest.approx(1.2)
        assert min(plan.radii) == pytest.approx(0.7)
        assert list(plan.counts) == [125, 125, 125, 125]

    def test_four_nonuniform(self):
        plan = plan_ablation("four-nonuniform", 2.0, 8)
        assert np.allclose(plan.radii, [1.4, 1.62, 1.76, 2.4])

    def test_segmented_sectors(self):
        plan = plan_ablation("segmented-nonuniform-density", 1.5, 200)
        ranges = [(a.theta_min_deg, a.theta_max_deg) for a in plan.arcs]
        assert ranges == [(0, 45), (45, 90), (90, 135), (135, 180)]
        fixed = plan_ablation("segmented-fixed-overlap", 1.5, 200)
        a = fixed.arcs
        assert (a[3].theta_min_deg, a[3].theta_max_deg) == (a[1].theta_min_deg, a[1].theta_max_deg)

    @pytest.mark.parametrize("kind", ABLATION_KINDS)
    def test_counts_sum(self, kind):
        assert sum(plan_ablation(kind, 1.7, 300).counts) == 150

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            plan_ablation("five-circles", 1.5, 100)


class TestAssembly:
    def test_rotation_block(self):
        basis = OrthogonalBasis(np.eye(2), [(0, 1)], np.array([1.0]))
        plan = SpectrumPlan([Arc(1.0, 90.0, 90.0, 1)], 1.0, 1, "test", [1.0])
        m = assemble_reservoir(basis, plan, seed=0).entries
        assert np.allclose(m, [[0, 1], [-1, 0]], atol=1e-15)
        assert np.allclose(sorted(np.linalg.eigvals(m).imag), [-1, 1])

    @pytest.mark.parametrize("g", [1.0, 1.5, 1.8])
    def test_spectral_fidelity(self, g):
        n = 256
        basis = generate_orthogonal_basis(n, seed=11)
        plan = plan_rforce(g, n)
        res = assemble_reservoir(basis, plan, seed=11)
        planned = res.eigenvalues
        assert res.entries.dtype == np.float64
        assert match_error(np.linalg.eigvals(res.entries), planned) <= 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            assemble_reservoir(generate_orthogonal_basis(10, 0), plan_rforce(1.5, 12), 0)

    def test_angles_within_arcs(self):
        plan = plan_rforce(1.5, 1000)
        values, arc = sample_plan_eigenvalues(plan, seed=4)
        for i, a in enumerate(plan.arcs):
            sel = values[arc == i]
            assert sel.size == a.count
            assert np.allclose(np.abs(sel), a.radius)
            theta = np.degrees(np.angle(sel))
            assert np.all((theta >= a.theta_min_deg - 1e-9) & (theta <= a.theta_max_deg + 1e-9))

    def test_heavy_negative_tail(self):
        m = make_reservoir("rforce", 1.5, 1000, seed=0).entries.ravel()
        mu, sd = m.mean(), m.std()
        assert m.min() < -0.2 * 1.5
        assert mu - 2.326 * sd > m.min()

    def test_make_reservoir_kinds(self):
        for kind in ("normal", "rforce") + ABLATION_KINDS:
            res = make_reservoir(kind, 1.5, 20, seed=1)
            assert isinstance(res, ReservoirMatrix)
            assert res.init_kind == kind
            assert res.entries.shape == (20, 20)
