import numpy as np
import pytest

from fiszkit import (NoiseModel, SeedSpec, TriangularKernel, VarFnConfig,
                     VarianceEstimate, default_bandwidth,
                     estimate_variance_function, make_blocks, nw_variance_raw,
                     pava_isotone, preliminary_fit, running_mean, sample_noise)


def nw_oracle(alpha_hat, resid_sq, b, grid):
    """Double-loop evaluation of the kernel-weighted residual mean."""
    out = np.empty(len(grid))
    for gi, u in enumerate(grid):
        num = den = 0.0
        for a, r in zip(alpha_hat, resid_sq):
            v = abs((a - u) / b)
            w = 2.0 - 4.0 * v if v <= 0.5 else 0.0
            num += w * r
            den += w
        out[gi] = num / den if den > 0 else np.nan
    return out


def pava_oracle(values, weights):
    """Exhaustive search over monotone contiguous partitions."""
    n = len(values)
    best, best_sse = None, np.inf
    for mask in range(1 << (n - 1)):
        bounds = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        fitted = np.empty(n)
        means = []
        for a, b in zip(bounds, bounds[1:]):
            mu = np.sum(weights[a:b] * values[a:b]) / np.sum(weights[a:b])
            means.append(mu)
            fitted[a:b] = mu
        if any(means[i] > means[i + 1] for i in range(len(means) - 1)):
            continue
        sse = np.sum(weights * (values - fitted) ** 2)
        if sse < best_sse:
            best, best_sse = fitted, sse
    return best


class TestRunningMean:
    def test_zero_halfwidth_is_identity(self):
        x = np.array([3.0, 1.0, 4.0, 1.0])
        np.testing.assert_array_equal(running_mean(x, 0), x)

    def test_constant(self):
        np.testing.assert_allclose(running_mean(np.full(16, 2.5), 3), 2.5)

    def test_periodic_hand_value(self):
        np.testing.assert_allclose(running_mean(np.array([1.0, 2.0, 3.0]), 1),
                                   [2.0, 2.0, 2.0])

    def test_window_too_wide(self):
        with pytest.raises(ValueError):
            running_mean(np.arange(4.0), 2)


class TestKernelSmoother:
    def test_kernel_shape(self):
        k = TriangularKernel()
        assert k(0.0) == 2.0
        assert k(0.5) == 0.0
        assert k(0.6) == 0.0
        # unit integral on the support
        v = np.linspace(-0.5, 0.5, 100001)
        assert np.trapezoid(k(v), v) == pytest.approx(1.0, abs=1e-6)

    def test_constant_residuals(self):
        fit = preliminary_fit(np.full(32, 2.0) + np.tile([0.5, -0.5], 16), 1)
        fit.residuals_sq[:] = 3.0
        grid = np.linspace(fit.alpha_hat.min(), fit.alpha_hat.max(), 16)
        np.testing.assert_allclose(nw_variance_raw(fit, 0.5, None, grid), 3.0)

    def test_single_cluster_average(self):
        from fiszkit.varfn import PreliminaryFit
        fit = PreliminaryFit(np.array([5.0, 5.0]), np.array([1.0, 3.0]), 0)
        assert nw_variance_raw(fit, 1.0, None, np.array([5.0]))[0] == pytest.approx(2.0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(31)
        x = rng.uniform(1.0, 9.0, size=64)
        fit = preliminary_fit(np.sort(x), 2)  # sorted keeps every grid point populated
        grid = np.linspace(fit.alpha_hat.min(), fit.alpha_hat.max(), 40)
        b = 2.0
        got = nw_variance_raw(fit, b, None, grid)
        want = nw_oracle(fit.alpha_hat, fit.residuals_sq, b, grid)
        assert not np.any(np.isnan(want))
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_location_equivariance(self):
        rng = np.random.default_rng(32)
        from fiszkit.varfn import PreliminaryFit
        a = rng.uniform(0.0, 4.0, size=50)
        r = rng.uniform(0.0, 2.0, size=50)
        grid = np.linspace(0.0, 4.0, 21)
        base = nw_variance_raw(PreliminaryFit(a, r, 0), 0.7, None, grid)
        moved = nw_variance_raw(PreliminaryFit(a + 11.5, r, 0), 0.7, None, grid + 11.5)
        np.testing.assert_allclose(moved, base, rtol=1e-12)

    def test_nonpositive_bandwidth_rejected(self):
        fit = preliminary_fit(np.arange(8.0) + 1, 1)
        with pytest.raises(ValueError):
            nw_variance_raw(fit, 0.0, None, np.array([1.0]))


class TestPava:
    def test_forced_pooling(self):
        np.testing.assert_allclose(pava_isotone(np.array([3.0, 1.0, 2.0])), 2.0)

    def test_sorted_input_unchanged(self):
        v = np.array([1.0, 1.0, 2.5, 7.0])
        np.testing.assert_array_equal(pava_isotone(v), v)

    def test_matches_partition_oracle(self):
        rng = np.random.default_rng(33)
        for _ in range(60):
            n = int(rng.integers(2, 8))
            v = rng.normal(size=n)
            w = rng.uniform(0.2, 3.0, size=n)
            np.testing.assert_array_equal(pava_isotone(v, w), pava_oracle(v, w))

    def test_idempotent(self):
        rng = np.random.default_rng(34)
        v = rng.normal(size=40)
        once = pava_isotone(v)
        np.testing.assert_array_equal(pava_isotone(once), once)

    def test_preserves_weighted_mean(self):
        rng = np.random.default_rng(35)
        v = rng.normal(size=25)
        w = rng.uniform(0.5, 2.0, size=25)
        out = pava_isotone(v, w)
        assert np.sum(w * out) == pytest.approx(np.sum(w * v), rel=1e-12)

    def test_output_nondecreasing(self):
        rng = np.random.default_rng(36)
        out = pava_isotone(rng.normal(size=100))
        assert np.all(np.diff(out) >= 0)

    def test_errors(self):
        with pytest.raises(ValueError):
            pava_isotone(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            pava_isotone(np.ones(3), np.array([1.0, 0.0, 1.0]))


class TestDefaultBandwidth:
    def test_formula_value(self):
        alpha = np.linspace(0.0, 10.0, 2048)
        assert default_bandwidth(alpha) == pytest.approx(0.2 * 10.0 * 2048**-0.2)

    def test_constant_fallback_positive(self):
        assert default_bandwidth(np.full(64, 5.0)) == pytest.approx(0.2 * 6.0)

    def test_scales_with_range(self):
        a = np.linspace(0.0, 4.0, 512)
        assert default_bandwidth(2 * a) == pytest.approx(2 * default_bandwidth(a))


class TestEstimatePipeline:
    def test_zero_noise_floors_to_eps(self):
        est = estimate_variance_function(np.full(256, 7.0))
        assert est.floor_eps > 0
        np.testing.assert_array_equal(est.values, est.floor_eps)

    def test_values_monotone_and_floored(self):
        truth = make_blocks(1024, 1.0, 22.6)
        x = sample_noise(truth, NoiseModel("poisson"), SeedSpec(40, 1))
        est = estimate_variance_function(x, VarFnConfig(half_window=3))
        assert np.all(np.diff(est.values) >= 0)
        assert np.all(est.values >= est.floor_eps)

    def test_query_clamps_and_is_monotone(self):
        est = VarianceEstimate(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 9.0]), 1e-8)
        assert est.query(0.0) == 4.0
        assert est.query(99.0) == 9.0
        assert est.query(2.5) == 5.0
        u = np.linspace(-1.0, 5.0, 200)
        q = est.query(u)
        assert np.all(np.diff(q) >= 0)
        assert np.all((q >= 1e-8) & (q <= 9.0))

    def test_pava_stage_identity_on_monotone_grid(self):
        v = np.array([0.5, 0.5, 1.0, 2.0, 2.0, 3.5])
        np.testing.assert_array_equal(pava_isotone(v), v)

    def test_poisson_recovery_single_seed(self):
        truth = make_blocks(2048, 1.0, 22.6)
        x = sample_noise(truth, NoiseModel("poisson"), SeedSpec(41, 1))
        est = estimate_variance_function(x, VarFnConfig(half_window=3))
        fit = running_mean(x, 3)
        for q in np.quantile(fit, [0.25, 0.5, 0.75]):
            assert abs(est.query(q) - q) / q < 0.25

    def test_serialization_round_trip(self):
        truth = make_blocks(512, 1.0, 8.0)
        x = sample_noise(truth, NoiseModel("poisson"), SeedSpec(42, 1))
        est = estimate_variance_function(x)
        back = VarianceEstimate.from_lines(est.as_lines())
        np.testing.assert_array_equal(back.grid_u, est.grid_u)
        np.testing.assert_array_equal(back.values, est.values)
        assert back.floor_eps == est.floor_eps
        assert back.bandwidth == est.bandwidth

    def test_config_validation(self):
        with pytest.raises(ValueError):
            VarFnConfig(half_window=-1)
        with pytest.raises(ValueError):
            VarFnConfig(grid_size=1)
        with pytest.raises(ValueError):
            VarFnConfig(bandwidth=-2.0)
        with pytest.raises(ValueError):
            VarFnConfig(bandwidth="plugin")
