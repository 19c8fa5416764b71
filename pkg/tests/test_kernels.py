import math

import numpy as np
import pytest

from scorelab import (
    Ensemble,
    ValidationError,
    crps_ensemble,
    g_registry,
    generalized_kernel_score,
    kernel_divergence,
    kernel_entropy,
    kernel_from_spec,
    kernel_registry,
    kernel_score_exact,
    kernel_score_mc,
    tw_crps,
    weight_transform,
)
from scorelab.propriety import gaussian_kernel_score_normal

from conftest import naive_kernel_score


def ens(*values):
    return Ensemble(np.array(values, dtype=float))


class TestRegistry:
    def test_euclidean_beta_value(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        assert k.eval(0.0, 1.0) == 1.0
        assert k.homogeneity_degree == 1.0

    def test_gaussian_vanishes_on_diagonal(self):
        k = kernel_registry("gaussian", lam=1.0)
        assert k.eval(0.3, 0.3) == 0.0
        assert k.eval(0.0, 1.0) > 0.0

    def test_beta_out_of_range(self):
        with pytest.raises(ValidationError):
            kernel_registry("euclidean_beta", beta=2.5)
        with pytest.raises(ValidationError):
            kernel_registry("euclidean_beta", beta=0.0)

    def test_unknown_id(self):
        with pytest.raises(ValidationError):
            kernel_registry("matern", nu=1.5)

    def test_symmetry_and_nonnegativity(self, rng):
        kernels = [
            kernel_registry("euclidean_beta", beta=0.7),
            kernel_registry("gaussian", lam=0.5),
            kernel_registry("laplacian", lam=2.0),
        ]
        for k in kernels:
            for _ in range(50):
                x, y = rng.normal(size=2)
                assert k.eval(x, y) == k.eval(y, x)
                assert k.eval(x, y) >= 0.0

    def test_spec_strings(self):
        assert kernel_from_spec("energy:beta=1.0").eval(0.0, 2.0) == 2.0
        assert kernel_from_spec("gaussian:lambda=1.0").eval(1.0, 1.0) == 0.0
        tw = kernel_from_spec("tw:base=energy:beta=1.0,t=0.5")
        assert tw.eval(0.0, 0.2) == 0.0  # both chained to 0.5
        assert tw.eval(0.0, 2.0) == 1.5


class TestExactScore:
    def test_reproduces_crps(self, rng):
        k = kernel_registry("euclidean_beta", beta=1.0)
        assert kernel_score_exact(k, ens(0.0, 1.0), 0.5, "fair").value == pytest.approx(
            crps_ensemble([0, 1], 0.5).value, abs=1e-15
        )
        members = rng.normal(size=14)
        y = float(rng.normal())
        for variant in ("fair", "empirical"):
            a = kernel_score_exact(k, Ensemble(members), y, variant).value
            b = crps_ensemble(members, y, variant=variant).value
            assert a == pytest.approx(b, abs=1e-12)

    def test_point_mass_zero(self):
        for spec in ("energy:beta=1", "gaussian:lambda=1"):
            k = kernel_from_spec(spec)
            assert kernel_score_exact(k, ens(4.0), 4.0, "empirical").value == 0.0

    def test_fair_needs_two(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        with pytest.raises(ValidationError):
            kernel_score_exact(k, ens(1.0), 0.0, "fair")

    def test_matches_naive_double_sum(self, rng):
        k = kernel_registry("gaussian", lam=1.3)
        h = lambda a, b: 2.0 - 2.0 * math.exp(-((a - b) ** 2) / (4 * 1.3))
        for _ in range(30):
            members = rng.normal(size=int(rng.integers(2, 8)))
            w = rng.dirichlet(np.ones(members.size))
            y = float(rng.normal())
            for variant in ("fair", "empirical"):
                got = kernel_score_exact(k, Ensemble(members, w), y, variant).value
                want = naive_kernel_score(h, members, y, variant, list(w))
                assert got == pytest.approx(want, abs=1e-12)


class TestDivergenceEntropy:
    def test_zero_on_equal(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        p = ens(0.0, 1.0, 2.0)
        assert kernel_divergence(k, p, p) == 0.0

    def test_hand_value_point_masses(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        assert kernel_divergence(k, ens(0.0), ens(1.0)) == pytest.approx(1.0)

    def test_symmetry_bitwise(self, rng):
        for spec in ("energy:beta=1", "gaussian:lambda=1", "laplacian:lambda=1"):
            k = kernel_from_spec(spec)
            for _ in range(100):
                p = Ensemble(rng.normal(size=int(rng.integers(1, 6))))
                q = Ensemble(rng.normal(size=int(rng.integers(1, 6))))
                assert kernel_divergence(k, p, q) == kernel_divergence(k, q, p)

    def test_nonnegative(self, rng):
        for spec in ("energy:beta=0.5", "energy:beta=1.5", "gaussian:lambda=2"):
            k = kernel_from_spec(spec)
            for _ in range(100):
                p = Ensemble(rng.normal(size=int(rng.integers(1, 6))))
                q = Ensemble(rng.normal(size=int(rng.integers(1, 6))))
                assert kernel_divergence(k, p, q) >= 0.0

    def test_symmetry_and_nonnegativity_all_registered_kernels(self, rng):
        base = kernel_registry("euclidean_beta", beta=1.0)
        univariate = {
            "euclidean_beta": kernel_registry("euclidean_beta", beta=0.8),
            "gaussian": kernel_registry("gaussian", lam=1.0),
            "laplacian": kernel_registry("laplacian", lam=1.5),
            "chained": weight_transform(base, chaining=lambda x: np.maximum(x, 0.0)),
            "rescaled": weight_transform(
                base, rescaling=lambda x: 1.0 / (1.0 + np.asarray(x) ** 2)
            ),
        }
        for name, k in univariate.items():
            for _ in range(1000):
                p = Ensemble(rng.normal(size=int(rng.integers(1, 5))))
                q = Ensemble(rng.normal(size=int(rng.integers(1, 5))))
                d = kernel_divergence(k, p, q)
                assert d == kernel_divergence(k, q, p), name
                assert d >= 0.0, name
        kv = kernel_registry("variogram", p=0.7, d=2)
        for _ in range(1000):
            p = Ensemble(rng.normal(size=(int(rng.integers(1, 5)), 2)))
            q = Ensemble(rng.normal(size=(int(rng.integers(1, 5)), 2)))
            d = kernel_divergence(kv, p, q)
            assert d == kernel_divergence(kv, q, p)
            assert d >= 0.0

    def test_score_is_divergence_to_point_mass(self, rng):
        # S(P, y) = d(P, delta_y) + h(y, y)/2 must hold bit for bit
        for spec in ("energy:beta=1", "gaussian:lambda=1"):
            k = kernel_from_spec(spec)
            for _ in range(50):
                members = rng.normal(size=int(rng.integers(1, 7)))
                y = float(rng.normal())
                p = Ensemble(members)
                lhs = kernel_divergence(k, p, ens(y)) + 0.5 * k.eval(y, y)
                rhs = kernel_score_exact(k, p, y, "empirical").value
                assert lhs == rhs

    def test_entropy_uniform_two_points(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        assert kernel_entropy(k, ens(0.0, 1.0)) == pytest.approx(0.25)

    def test_entropy_point_mass(self):
        k = kernel_registry("gaussian", lam=1.0)
        assert kernel_entropy(k, ens(3.0)) == 0.0

    def test_entropy_midpoint_concavity(self, rng):
        for spec in ("energy:beta=1", "gaussian:lambda=1"):
            k = kernel_from_spec(spec)
            for _ in range(200):
                p = Ensemble(rng.normal(size=int(rng.integers(1, 6))))
                q = Ensemble(rng.normal(size=int(rng.integers(1, 6))))
                mix = Ensemble(
                    np.concatenate([p.members, q.members]),
                    np.concatenate([0.5 * p.weights, 0.5 * q.weights]),
                )
                hm = kernel_entropy(k, mix)
                assert hm >= 0.5 * kernel_entropy(k, p) + 0.5 * kernel_entropy(k, q) - 1e-12

    def test_sqrt_triangle_inequality(self, rng):
        for spec in ("energy:beta=1", "gaussian:lambda=1"):
            k = kernel_from_spec(spec)
            for _ in range(200):
                a, b, c = (
                    Ensemble(rng.normal(size=int(rng.integers(1, 6)))) for _ in range(3)
                )
                dab = math.sqrt(kernel_divergence(k, a, b))
                dbc = math.sqrt(kernel_divergence(k, b, c))
                dac = math.sqrt(kernel_divergence(k, a, c))
                assert dac <= dab + dbc + 1e-12


class TestGeneralizedKernelScore:
    def test_identity_reduces_to_kernel_score(self, rng):
        k = kernel_registry("euclidean_beta", beta=1.0)
        g = g_registry("identity")
        for _ in range(30):
            p = Ensemble(rng.normal(size=int(rng.integers(1, 7))))
            y = float(rng.normal())
            assert generalized_kernel_score(k, g, p, y).value == pytest.approx(
                kernel_score_exact(k, p, y, "empirical").value, abs=1e-13
            )

    def test_point_mass_on_outcome_is_zero(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        g = g_registry("log1p")
        assert generalized_kernel_score(k, g, ens(2.0), 2.0).value == 0.0

    def test_sqrt_eps_at_zero_entropy(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        g = g_registry("sqrt_eps")
        val = generalized_kernel_score(k, g, ens(0.0), 1.0).value
        assert math.isfinite(val) and val > 0.0

    def test_hand_formula_log1p(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        g = g_registry("log1p")
        p = ens(0.0, 1.0)
        y = 2.0
        H = 0.25
        T = 0.5 * (2.0 + 1.0)
        expect = T / (1 + H) + math.log1p(H) - 2 * H / (1 + H)
        assert generalized_kernel_score(k, g, p, y).value == pytest.approx(expect, abs=1e-14)

    def test_propriety_on_random_pairs(self, rng):
        # expected score under Q is minimized at P = Q
        k = kernel_registry("euclidean_beta", beta=1.0)
        pts = np.array([0.0, 1.0, 2.0])
        for gname in ("log1p", "sqrt_eps"):
            g = g_registry(gname)
            for _ in range(300):
                wp = rng.dirichlet(np.ones(3))
                wq = rng.dirichlet(np.ones(3))
                p, q = Ensemble(pts, wp), Ensemble(pts, wq)
                spq = sum(
                    wq[i] * generalized_kernel_score(k, g, p, pts[i]).value for i in range(3)
                )
                sqq = sum(
                    wq[i] * generalized_kernel_score(k, g, q, pts[i]).value for i in range(3)
                )
                assert sqq <= spq + 1e-12


class TestWeightTransforms:
    def test_identity_chaining_is_identity(self, rng):
        base = kernel_registry("gaussian", lam=1.0)
        chained = weight_transform(base, chaining=lambda x: x)
        for _ in range(100):
            x, y = rng.normal(size=2)
            assert chained.eval(x, y) == base.eval(x, y)

    def test_unit_rescaling_is_identity(self, rng):
        base = kernel_registry("euclidean_beta", beta=1.0)
        scaled = weight_transform(base, rescaling=lambda x: np.ones_like(np.asarray(x)))
        for _ in range(100):
            x, y = rng.normal(size=2)
            assert scaled.eval(x, y) == base.eval(x, y)

    def test_negative_rescaling_rejected(self):
        base = kernel_registry("euclidean_beta", beta=1.0)
        bad = weight_transform(base, rescaling=lambda x: -np.ones_like(np.asarray(x)))
        with pytest.raises(ValidationError):
            bad.eval(0.0, 1.0)

    def test_chaining_reproduces_threshold_weighting(self):
        k = kernel_from_spec("tw:base=energy:beta=1.0,t=0.5")
        got = kernel_score_exact(k, ens(0.0, 1.0), 2.0, "fair").value
        assert got == pytest.approx(1.0)
        assert got == pytest.approx(tw_crps([0, 1], 2.0, t=0.5).value, abs=1e-15)

    def test_exactly_one_mode(self):
        base = kernel_registry("euclidean_beta", beta=1.0)
        with pytest.raises(ValidationError):
            weight_transform(base)
        with pytest.raises(ValidationError):
            weight_transform(base, chaining=lambda x: x, rescaling=lambda x: x)


class TestMonteCarlo:
    def test_deterministic_under_seed(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        p = ens(0.0, 1.0, 2.0)
        sampler = lambda m, seed: __import__("scorelab").forecast_sample(p, m, seed)
        a = kernel_score_mc(k, sampler, 0.5, m=64, seed=11)
        b = kernel_score_mc(k, sampler, 0.5, m=64, seed=11)
        assert a.value == b.value and a.se == b.se

    def test_constant_sampler_gives_zero(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        sampler = lambda m, seed: np.full(m, 0.5)
        out = kernel_score_mc(k, sampler, 0.5, m=16, seed=0)
        assert out.value == 0.0 and out.se == 0.0

    def test_m_below_two_rejected(self):
        k = kernel_registry("euclidean_beta", beta=1.0)
        with pytest.raises(ValidationError):
            kernel_score_mc(k, lambda m, s: np.zeros(m), 0.0, m=1, seed=0)

    def test_bootstrap_unbiased_for_empirical_score(self):
        # bootstrap draws come from the empirical measure, so the fair-form
        # estimator is unbiased for the empirical-variant exact score
        from scorelab import forecast_sample

        k = kernel_registry("euclidean_beta", beta=1.0)
        p = ens(0.0, 1.0, 3.0, 4.5)
        exact = kernel_score_exact(k, p, 0.7, "empirical").value
        sampler = lambda m, seed: forecast_sample(p, m, seed)
        reps = [kernel_score_mc(k, sampler, 0.7, m=16, seed=s) for s in range(2000)]
        mean = float(np.mean([r.value for r in reps]))
        se_mean = float(np.mean([r.se for r in reps])) / math.sqrt(len(reps))
        assert abs(mean - exact) <= 4.0 * se_mean

    def test_iid_normal_unbiased_for_exact_gaussian_score(self):
        from scorelab import Normal, forecast_sample

        lam = 1.0
        k = kernel_registry("gaussian", lam=lam)
        f = Normal(0.3, 1.2)
        exact = gaussian_kernel_score_normal(f, 0.5, lam)
        sampler = lambda m, seed: forecast_sample(f, m, seed)
        reps = [kernel_score_mc(k, sampler, 0.5, m=16, seed=s) for s in range(2000)]
        mean = float(np.mean([r.value for r in reps]))
        se_mean = float(np.mean([r.se for r in reps])) / math.sqrt(len(reps))
        assert abs(mean - exact) <= 4.0 * se_mean

    def test_jackknife_se_tracks_spread(self):
        from scorelab import forecast_sample

        k = kernel_registry("euclidean_beta", beta=1.0)
        p = ens(0.0, 1.0, 3.0, 4.5)
        sampler = lambda m, seed: forecast_sample(p, m, seed)
        reps = [kernel_score_mc(k, sampler, 0.7, m=32, seed=s) for s in range(500)]
        spread = float(np.std([r.value for r in reps]))
        typical_se = float(np.mean([r.se for r in reps]))
        assert 0.5 * spread <= typical_se <= 2.0 * spread
