import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from fedfda import datagen as dg
from fedfda import privacy
from fedfda import rng as rngmod
from fedfda.independent import default_clip_params, rescaled_clipped_vector
from fedfda.wavelet import default_coarsest_level, overlap_constant


class TestClip:
    @pytest.mark.parametrize("v,tau,expected", [
        (0.5, 1.0, 0.5),
        (-3.2, 1.0, -1.0),
        (7.0, 0.0, 0.0),
    ])
    def test_examples(self, v, tau, expected):
        assert privacy.clip(v, tau) == expected

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            privacy.clip(1.0, -0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0, 1e6))
    def test_idempotent_lipschitz_bounded(self, a, b, tau):
        ca, cb = privacy.clip(a, tau), privacy.clip(b, tau)
        assert privacy.clip(ca, tau) == ca
        assert abs(ca - cb) <= abs(a - b) + 1e-9
        assert abs(ca) <= tau


class TestThresholds:
    def test_independent_unit_case(self):
        params = privacy.ClipThresholdParams(c=1.0, N=math.e, psi_sup=1.0,
                                             alpha=1.0, R=0.0)
        tau = privacy.tau_independent(0, 1, params)
        assert tau == pytest.approx(2 * 2**1.5 * (1 + 1 / 3), rel=1e-12)

    def test_radius_term_only(self):
        params = privacy.ClipThresholdParams(c=1e-30, N=10, psi_sup=1.0,
                                             alpha=1.0, R=2.0)
        tau = privacy.tau_independent(2, 4, params)
        assert tau == pytest.approx(2 * 2.0**-3, abs=1e-12)

    def test_decreasing_in_points_per_subject(self):
        params = privacy.ClipThresholdParams(c=3.0, N=100, psi_sup=1.8,
                                             alpha=1.0, R=2.0)
        taus = [privacy.tau_independent(4, m, params) for m in (1, 4, 16, 64)]
        assert all(a > b for a, b in zip(taus, taus[1:]))

    def test_common_examples(self):
        assert privacy.tau_common(math.e**2, 0.0) == pytest.approx(2.0, rel=1e-12)
        assert privacy.tau_common(math.e**2, 1.5) == pytest.approx(3.5, rel=1e-12)
        assert privacy.tau_common(2, 10.0) == pytest.approx(
            10 + math.sqrt(2 * math.log(2)), rel=1e-12)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            privacy.ClipThresholdParams(c=0.0, N=10, psi_sup=1.0, alpha=1.0, R=1.0)
        with pytest.raises(ValueError):
            privacy.ClipThresholdParams(c=1.0, N=1, psi_sup=1.0, alpha=1.0, R=1.0)


class TestNoiseScales:
    def test_independent_unit_case(self):
        sigma = privacy.sigma_independent(L=1, level=0, m_s=1, tau_l=1.0,
                                          n_s=10, eps=1.0, delta=2 / math.e,
                                          c_overlap=1)
        assert sigma == pytest.approx(0.2, rel=1e-12)

    def test_infinite_budget_is_noiseless(self):
        assert privacy.sigma_independent(4, 2, 8, 3.0, 5, math.inf, 0.0, 3) == 0.0
        assert privacy.sigma_common(3.0, 8, 5, math.inf, 0.0) == 0.0

    def test_halves_with_doubled_n(self):
        a = privacy.sigma_independent(3, 1, 4, 2.0, 10, 1.0, 1e-5, 3)
        b = privacy.sigma_independent(3, 1, 4, 2.0, 20, 1.0, 1e-5, 3)
        assert a == pytest.approx(2 * b, rel=1e-12)

    def test_common_unit_case(self):
        sigma = privacy.sigma_common(tau=1.0, m=1, n_s=2, eps=1.0, delta=2 / math.e)
        assert sigma == pytest.approx(1.0, rel=1e-12)

    def test_common_sqrt_m_scaling(self):
        a = privacy.sigma_common(2.0, 4, 10, 1.0, 1e-5)
        b = privacy.sigma_common(2.0, 16, 10, 1.0, 1e-5)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_zero_delta_with_finite_eps_rejected(self):
        with pytest.raises(ValueError, match="delta"):
            privacy.sigma_independent(2, 1, 4, 1.0, 5, 1.0, 0.0, 3)
        with pytest.raises(ValueError, match="delta"):
            privacy.sigma_common(1.0, 4, 5, 1.0, 0.0)


class TestSensitivityBound:
    def test_examples(self):
        assert privacy.sensitivity_bound_independent(4, 2, 1) == pytest.approx(1.0)
        assert privacy.sensitivity_bound_independent(1, 3, 3) == pytest.approx(1.0)
        assert privacy.sensitivity_bound_independent(4, 10**9, 3) < 1e-8


def _audit_setup(n, m, L, seed, family_depth=12):
    from fedfda.harness import shared_table
    spec = dg.CurveSpec(R=2.0, L_star=6, p=0.9, alpha=1.0)
    table = shared_table(spec)
    fed = dg.FederationConfig((dg.ServerConfig(n, m, 1.0, 1e-4),),
                              1.0, 2.0, dg.Design.INDEPENDENT)
    ds = dg.generate_federation(fed, spec, table, base_seed=seed)[0]
    params = default_clip_params(fed, table)
    l0 = default_coarsest_level(table.family)
    L = max(L, l0)

    def stat(d):
        return rescaled_clipped_vector(d, table, l0, L, params)

    def resample(d, i, rng):
        new = dg.ServerDataset(points=d.points.copy(), y=d.y.copy(),
                               config=d.config, design=d.design)
        pts = rng.random(size=(1, m))
        batch = dg.sample_curve_batch(spec, 1, rng)
        y = dg.observe(table, batch, pts, rng)
        new.points[i] = pts[0]
        new.y[i] = y[0]
        return new

    return ds, stat, resample, table, L


class TestAudit:
    def test_identical_replacement_is_zero(self):
        ds, stat, _, _, _ = _audit_setup(5, 4, 4, seed=31)

        def same(d, i, rng):
            return d

        worst = privacy.audit_sensitivity(stat, ds, same, 5,
                                          rngmod.make_rng(0, rngmod.AUDIT, 0, 0))
        assert worst == 0.0

    def test_haar_single_level_hand_computed(self, haar_table):
        # one individual, one point, single level; swap the record and
        # compare against the coefficient difference computed by hand
        cfg = dg.ServerConfig(1, 1, 1.0, 1e-4)
        params = privacy.ClipThresholdParams(c=3.0, N=2, psi_sup=1.0,
                                             alpha=1.0, R=2.0)
        base = dg.ServerDataset(points=np.array([[0.2]]), y=np.array([[1.5]]),
                                config=cfg, design=dg.Design.INDEPENDENT)
        other = dg.ServerDataset(points=np.array([[0.7]]), y=np.array([[-0.5]]),
                                 config=cfg, design=dg.Design.INDEPENDENT)

        def stat(d):
            return rescaled_clipped_vector(d, haar_table, 0, 0, params)

        tau = privacy.tau_independent(0, 1, params)
        assert tau > 2.0  # clipping inactive for these records
        # father value is 1 everywhere, so the father entries are y / tau;
        # the mother value is +1 at 0.2 and -1 at 0.7
        father_diff = (1.5 - (-0.5)) / tau
        mother_diff = (1.5 * 1.0 - (-0.5) * (-1.0)) / tau
        by_hand = math.hypot(father_diff, mother_diff)

        def swap(d, i, rng):
            return other

        worst = privacy.audit_sensitivity(stat, base, swap, 3,
                                          rngmod.make_rng(1, rngmod.AUDIT, 0, 0))
        assert worst == pytest.approx(by_hand, rel=1e-12)

    def test_random_neighbors_respect_bound(self):
        rng = rngmod.make_rng(7, rngmod.AUDIT, 1, 0)
        for n, m, L in ((2, 1, 2), (5, 4, 4), (20, 16, 6)):
            ds, stat, resample, table, L_eff = _audit_setup(n, m, L, seed=n)
            bound = privacy.sensitivity_bound_independent(
                L_eff, n, overlap_constant(table.family))
            worst = privacy.audit_sensitivity(stat, ds, resample, 40, rng)
            assert worst <= bound


class TestCommonDesignAudit:
    def test_point_mean_sensitivity_bound(self):
        # swapping one individual moves each clipped per-point mean by at
        # most 2 tau / n, so the l2 change over m points is <= 2 tau sqrt(m)/n
        n, m, tau = 8, 6, 2.5
        cfg = dg.ServerConfig(n, m, 1.0, 1e-4)
        rng0 = np.random.default_rng(3)
        grid = np.tile(np.arange(1, m + 1) / m, (n, 1))
        ds = dg.ServerDataset(points=grid, y=rng0.normal(scale=4, size=(n, m)),
                              config=cfg, design=dg.Design.COMMON)
        bound = 2 * tau * math.sqrt(m) / n

        def stat(d):
            return privacy.clip(d.y, tau).mean(axis=0)

        def resample(d, i, rng):
            new = dg.ServerDataset(points=d.points, y=d.y.copy(),
                                   config=d.config, design=d.design)
            new.y[i] = rng.normal(scale=50, size=m)  # adversarially large
            return new

        worst = privacy.audit_sensitivity(stat, ds, resample, 200,
                                          rngmod.make_rng(5, rngmod.AUDIT, 0, 0))
        assert worst <= bound


class TestTruncatedGaussianBias:
    def test_bound_formula(self):
        assert privacy.truncated_gaussian_bias_bound(1.0, 3.0) == pytest.approx(
            4 * math.exp(-2.0), rel=1e-12)
        with pytest.raises(ValueError):
            privacy.truncated_gaussian_bias_bound(2.0, 1.5)

    def test_numerical_integration_respects_bound(self):
        for mu in (-2.0, -0.5, 0.3, 1.7):
            for gap in (0.5, 1.5, 3.0):
                tau = abs(mu) + gap
                val, _ = integrate.quad(
                    lambda w: np.clip(w, -tau, tau) * stats.norm.pdf(w, loc=mu),
                    -np.inf, np.inf)
                bias = abs(val - mu)
                assert bias <= privacy.truncated_gaussian_bias_bound(mu, tau) + 1e-12
