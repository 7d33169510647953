import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src._shared.errors import SizeLimitError, UnsupportedParameterError
from src._shared.rng import RngSeed
from src.ergodic.chain import (
    chain_states,
    chain_step,
    contraction_proxy,
    krylov_bogoliubov,
    pool_states,
    tightness_report,
)
from src.ergodic.checks import entropy_cost_check, invariance_check, invariant_variance
from src.ergodic.models import ChainConfig, EmpiricalMeasure
from src.ergodic.transport import w2_1d, w2_exact_small, write_measure_csv
from src.fbm.sampling import volterra_covariance
from src.sde.models import ClippedCubicDrift, ConstantSigma, ModelSpec
from src.sde.oracles import discrete_linear_law
from src.sde.solver import moment_diagnostic


def measure(values) -> EmpiricalMeasure:
    return EmpiricalMeasure(samples=np.asarray(values, dtype=float))


def euler_law(model, x, grid):
    return discrete_linear_law(model, x, grid, volterra_covariance(grid, model.H))


def euler_stationary_variance(model, grid):
    gain, _ = euler_law(model, 1.0, grid)
    _, q = euler_law(model, 0.0, grid)
    return q / (1.0 - gain**2), gain**2, q


class TestChain:
    def test_step_matches_gaussian_law(self, free_model, grid_64, seed):
        cfg = ChainConfig(x0=[0.5], n_steps=1, n_chains=4000, seed=seed)
        step = chain_states(cfg, free_model, grid_64)[:, 1, 0]
        mean, var = euler_law(free_model, 0.5, grid_64)
        assert abs(step.mean() - mean) <= 3.0 * math.sqrt(var / step.size)
        assert step.var(ddof=1) == pytest.approx(var, rel=0.1)

    def test_linear_step_mean(self, ou_model, grid_64, seed):
        cfg = ChainConfig(x0=[2.0], n_steps=1, n_chains=4000, seed=seed)
        step = chain_states(cfg, ou_model, grid_64)[:, 1, 0]
        mean, var = euler_law(ou_model, 2.0, grid_64)
        assert mean == pytest.approx(2.0 * math.exp(-1.0), rel=2e-2)
        assert abs(step.mean() - mean) <= 3.0 * math.sqrt(var / step.size)

    def test_single_chain_replays_chain_zero(self, ou_model, grid_64, seed):
        cfg = ChainConfig(x0=[1.0], n_steps=3, n_chains=5, seed=seed)
        states = chain_states(cfg, ou_model, grid_64)
        x = np.array([1.0])
        for k in range(3):
            x = chain_step(x, ou_model, grid_64, seed, step=k)
            np.testing.assert_allclose(x, states[0, k + 1], rtol=1e-12)
        again = chain_step([1.0], ou_model, grid_64, seed, step=0)
        assert again.tobytes() == states[0, 1].tobytes()

    def test_one_step_measure(self, ou_model, grid_64, seed):
        cfg = ChainConfig(x0=[1.0], n_steps=1, n_chains=64, seed=seed)
        mu = krylov_bogoliubov(cfg, ou_model, grid_64)
        assert mu.size == 64
        np.testing.assert_array_equal(
            mu.samples, chain_states(cfg, ou_model, grid_64)[:, 1]
        )

    def test_pooling_uses_every_prefix(self):
        states = np.arange(12, dtype=float).reshape(2, 3, 2)
        mu = pool_states(states)
        assert mu.size == 4
        np.testing.assert_array_equal(mu.samples[0], [2.0, 3.0])


class TestTightness:
    def test_linear_moments_bounded(self, ou_model, grid_64, seed):
        v_bar, a, q = euler_stationary_variance(ou_model, grid_64)
        cfg = ChainConfig(x0=[3.0], n_steps=20, n_chains=500, seed=seed)
        states = chain_states(cfg, ou_model, grid_64)
        report = tightness_report(
            states, [1.0, 4.0, 16.0], contraction=a, moment_scale=q
        )
        assert report.moment_bound == pytest.approx(q / (1.0 - a) + 9.0)
        assert max(report.cesaro_moments) <= report.moment_bound * 1.05
        for row in report.tail:
            assert row.mass <= row.chebyshev
        last = report.step_moments[-1]
        assert abs(last.mean - v_bar) <= 3.0 * last.se + 1e-3

    def test_contraction_proxy(self, ou_model, grid_64, seed):
        moments = moment_diagnostic(ou_model, [[0.0], [2.0]], 500, seed, grid_64)
        proxy = contraction_proxy(ou_model, moments)
        assert proxy == pytest.approx(moments.max_ratio * math.exp(-2.0))
        assert proxy < 1.0


class TestW2:
    def test_identical(self):
        mu = measure([0.3, -1.0, 2.5])
        assert w2_1d(mu, mu) == 0.0
        assert w2_exact_small(mu, mu) == 0.0

    def test_three_point_shift(self):
        assert w2_1d(measure([0, 1, 2]), measure([3, 1, 2])) == pytest.approx(1.0)

    def test_unequal_sizes_use_quantiles(self):
        mu, nu = measure([0.0, 1.0]), measure([1.0, 0.0, 0.0, 1.0])
        assert w2_1d(mu, nu) == pytest.approx(0.0, abs=1e-12)
        rng = np.random.default_rng(3)
        a, b = measure(rng.normal(size=7)), measure(rng.normal(size=11) + 0.5)
        assert w2_1d(a, b) == pytest.approx(w2_exact_small(a, b), rel=1e-8)

    def test_location_shift(self):
        rng = np.random.default_rng(11)
        mu = measure(rng.normal(size=20_000))
        nu = measure(rng.normal(size=20_000) + 1.5)
        assert w2_1d(mu, nu) == pytest.approx(1.5, rel=0.02)

    def test_brute_force_four_points(self):
        mu = measure([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0]])
        nu = measure([[0.5, 0.5], [2.0, 2.0], [-1.0, 0.0], [1.0, -1.0]])
        best = min(
            np.mean(np.sum((mu.samples - nu.samples[list(perm)]) ** 2, axis=1))
            for perm in itertools.permutations(range(4))
        )
        assert w2_exact_small(mu, nu) == pytest.approx(math.sqrt(best))
        assert w2_exact_small(nu, mu) == pytest.approx(w2_exact_small(mu, nu))

    def test_higher_dimension_routes_to_exact(self):
        mu = measure([[0.0, 0.0], [1.0, 1.0]])
        nu = measure([[1.0, 1.0], [2.0, 2.0]])
        assert w2_1d(mu, nu) == pytest.approx(math.sqrt(2.0))

    def test_size_limit(self):
        big = measure(np.zeros((513, 2)))
        with pytest.raises(SizeLimitError):
            w2_exact_small(big, measure([[0.0, 0.0]]))

    @settings(max_examples=30, deadline=None)
    @given(
        points=arrays(
            np.float64,
            (3, 4, 2),
            elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False),
        )
    )
    def test_triangle_inequality(self, points):
        a, b, c = (measure(p) for p in points)
        direct = w2_exact_small(a, c)
        assert direct <= w2_exact_small(a, b) + w2_exact_small(b, c) + 1e-9

    def test_write_csv(self, tmp_path):
        target = write_measure_csv(measure([[1.0, 2.0]]), tmp_path / "mu.csv")
        assert target.read_text().splitlines()[0] == "x1,x2"


class TestInvariance:
    def test_invariant_gaussian(self, ou_model, grid_64, seed):
        v_bar, _, _ = euler_stationary_variance(ou_model, grid_64)
        samples = math.sqrt(v_bar) * seed.generator(99).standard_normal(2000)
        report = invariance_check(measure(samples), ou_model, grid_64, seed)
        assert report.within_floor

    def test_far_from_stationary(self, ou_model, grid_64, seed):
        report = invariance_check(measure(np.full(500, 5.0)), ou_model, grid_64, seed)
        mean, var = euler_law(ou_model, 5.0, grid_64)
        assert report.noise_floor == 0.0
        assert not report.within_floor
        expected = math.sqrt((5.0 - mean) ** 2 + var)
        assert report.distance == pytest.approx(expected, rel=0.05)

    @pytest.mark.slow
    def test_krylov_bogoliubov_variance(self, ou_model, grid_256):
        cfg = ChainConfig(
            x0=[0.0], n_steps=50, n_chains=200, seed=RngSeed(master=7)
        )
        mu = krylov_bogoliubov(cfg, ou_model, grid_256)
        v_bar = invariant_variance(ou_model)
        assert np.var(mu.samples) == pytest.approx(v_bar, rel=0.05)
        report = invariance_check(mu, ou_model, grid_256, RngSeed(master=8))
        assert report.within_floor


class TestEntropyCost:
    def test_no_tilt(self, ou_model, seed):
        report = entropy_cost_check(ou_model, 0.0, 1.0, seed)
        assert report.lhs == report.rhs == 0.0
        assert report.importance.mean == 0.0
        assert report.verdict == "pass"

    @pytest.mark.parametrize("tilt", [0.5, 1.0, 2.0])
    def test_reference_config(self, ou_model, seed, tilt):
        report = entropy_cost_check(ou_model, tilt, 1.0, seed)
        v_bar = invariant_variance(ou_model)
        assert report.lhs == pytest.approx(math.exp(-2.0) * tilt**2 / (2.0 * v_bar))
        assert report.margin > 0.0
        assert report.verdict == "pass"
        assert report.importance_verdict == "pass"
        assert report.w2_samples == pytest.approx(tilt, rel=0.05)

    def test_strong_contraction(self, seed):
        model = ModelSpec.model_validate(
            {
                "H": 0.7,
                "d": 1,
                "T": 1.0,
                "drift": {"family": "linear", "A": [[-20.0]]},
                "sigma": {"family": "constant", "scale": [1.0]},
            }
        )
        report = entropy_cost_check(model, 1.0, 1.0, seed)
        assert report.lhs < 1e-15
        assert report.verdict == "pass"

    def test_rejects_nonlinear(self, seed):
        model = ModelSpec(
            H=0.7,
            d=1,
            T=1.0,
            drift=ClippedCubicDrift(rho=1.0),
            sigma=ConstantSigma(scale=[1.0]),
        )
        with pytest.raises(UnsupportedParameterError):
            entropy_cost_check(model, 1.0, 1.0, seed)
