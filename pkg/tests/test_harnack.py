import math

import numpy as np
import pytest
from pydantic import TypeAdapter, ValidationError

from src._shared.errors import DomainError
from src.fbm.sampling import volterra_covariance
from src.harnack.checks import (
    change_of_measure_check,
    estimate_pt,
    feller_diagnostic,
    log_harnack_check,
    power_harnack_check,
)
from src.harnack.models import (
    ClippedExponential,
    ConstantFunction,
    GaussianBump,
    TestFunction,
)
from src.harnack.oracles import gaussian_expectation
from src.sde.oracles import discrete_linear_law

N_PATHS = 4000


@pytest.fixture(scope="module")
def bump() -> GaussianBump:
    return GaussianBump(base=0.2, center=[0.5], width=1.0)


def terminal_law(model, x, grid):
    return discrete_linear_law(model, x, grid, volterra_covariance(grid, model.H))


def within(estimate, exact, k=3.0):
    return abs(estimate.mean - exact) <= k * estimate.se


class TestFunctions:
    def test_union_by_family(self):
        adapter = TypeAdapter(TestFunction)
        f = adapter.validate_python(
            {
                "family": "clipped-exponential",
                "weights": [1.0],
                "lower": 0.1,
                "upper": 5,
            }
        )
        assert isinstance(f, ClippedExponential)
        assert f.floor == 0.1
        assert f.sup_norm == 5.0

    def test_clip_keeps_bounds(self):
        f = ClippedExponential(weights=[2.0], lower=0.1, upper=5.0)
        values = f(np.array([[-1e6], [0.0], [1e6]]))
        np.testing.assert_allclose(values, [0.1, 1.0, 5.0])

    def test_rejects_inverted_clip(self):
        with pytest.raises(ValidationError):
            ClippedExponential(weights=[1.0], lower=2.0, upper=1.0)

    def test_bump_floor_and_peak(self, bump):
        assert bump(np.array([0.5]))[0] == pytest.approx(1.2)
        assert bump.floor == 0.2
        assert np.all(bump(np.linspace(-50, 50, 101)[:, None]) >= bump.floor)


class TestEstimatePt:
    def test_constant(self, ou_model, grid_64, seed):
        f = ConstantFunction(value=2.0)
        estimate = estimate_pt(f, [1.0], ou_model, grid_64, 50, seed)
        assert (estimate.mean, estimate.se) == (2.0, 0.0)

    def test_gaussian_oracle(self, free_model, grid_256, seed, bump):
        mean, var = terminal_law(free_model, 0.3, grid_256)
        exact = gaussian_expectation(bump, mean, var)
        estimate = estimate_pt(bump, [0.3], free_model, grid_256, N_PATHS, seed)
        assert within(estimate, exact)

    def test_monotone_in_f(self, ou_model, grid_64, seed, bump):
        higher = bump.model_copy(update={"base": 0.5})
        low = estimate_pt(bump, [0.0], ou_model, grid_64, 500, seed)
        high = estimate_pt(higher, [0.0], ou_model, grid_64, 500, seed)
        assert low.mean < high.mean

    def test_hermite_moments(self):
        second = gaussian_expectation(lambda z: z[:, 0] ** 2, 1.0, 2.0)
        assert second == pytest.approx(3.0, rel=1e-12)


class TestLogHarnack:
    def test_constant_function(self, ou_model, grid_64, seed):
        f = ConstantFunction(value=3.0)
        report = log_harnack_check(f, [1.0], [0.0], ou_model, 1.0, grid_64, 100, seed)
        assert report.log_lhs == pytest.approx(math.log(3.0))
        assert report.margin == pytest.approx(report.bound)
        assert report.verdict == "pass"

    def test_equal_starts_is_jensen(self, ou_model, grid_64, seed, bump):
        report = log_harnack_check(
            bump, [0.2], [0.2], ou_model, 1.0, grid_64, 2000, seed
        )
        assert report.bound == 0.0
        assert report.verdict != "fail"

    def test_independent_seeds(self, ou_model, grid_64, seed, bump):
        report = log_harnack_check(
            bump, [1.0], [0.0], ou_model, 1.0, grid_64, 100, seed
        )
        assert report.seeds["lhs"] != report.seeds["rhs"]

    def test_ou_against_oracle(self, ou_model, grid_256, seed, bump):
        report = log_harnack_check(
            bump, [1.0], [0.0], ou_model, 1.0, grid_256, N_PATHS, seed
        )
        assert report.verdict == "pass"
        assert report.margin > 0.0
        lhs_law = terminal_law(ou_model, 0.0, grid_256)
        rhs_law = terminal_law(ou_model, 1.0, grid_256)
        assert within(report.lhs, gaussian_expectation(bump.log, *lhs_law))
        assert within(report.rhs, gaussian_expectation(bump, *rhs_law))

    def test_rejects_nonpositive_floor(self, ou_model, grid_64, seed):
        f = ConstantFunction.model_construct(family="constant", value=-1.0)
        with pytest.raises(DomainError):
            log_harnack_check(f, [1.0], [0.0], ou_model, 1.0, grid_64, 10, seed)


class TestPowerHarnack:
    @pytest.mark.parametrize("p", [1.0, 0.5])
    def test_rejects_p(self, p, ou_model, grid_64, seed, bump):
        with pytest.raises(DomainError):
            power_harnack_check(p, bump, [1.0], [0.0], ou_model, 1.0, grid_64, 10, seed)

    def test_constant_function(self, ou_model, grid_64, seed):
        f = ConstantFunction(value=2.0)
        report = power_harnack_check(
            3.0, f, [1.0], [0.0], ou_model, 1.0, grid_64, 50, seed, density_paths=0
        )
        assert report.margin == pytest.approx(1.5 * report.bound)
        assert report.density_moment is None
        assert report.verdict == "pass"

    def test_equal_starts_is_cauchy_schwarz(self, ou_model, grid_64, seed, bump):
        report = power_harnack_check(
            2.0, bump, [0.0], [0.0], ou_model, 1.0, grid_64, 2000, seed
        )
        assert report.bound == 0.0
        assert report.verdict != "fail"
        assert report.density_moment.moment.mean == 1.0

    def test_ou_against_oracle(self, ou_model, grid_256, seed, bump):
        report = power_harnack_check(
            2.0,
            bump,
            [1.0],
            [0.0],
            ou_model,
            1.0,
            grid_256,
            N_PATHS,
            seed,
            density_paths=500,
        )
        assert report.verdict == "pass"
        lhs_law = terminal_law(ou_model, 0.0, grid_256)
        rhs_law = terminal_law(ou_model, 1.0, grid_256)
        assert within(report.lhs, gaussian_expectation(bump, *lhs_law))
        squared = gaussian_expectation(lambda z: bump(z) ** 2, *rhs_law)
        assert within(report.rhs, squared)
        assert report.density_moment.verdict == "pass"
        assert report.density_moment.moment.n == 500


class TestChangeOfMeasure:
    def test_equal_starts(self, ou_model, grid_64, seed, bump):
        report = change_of_measure_check(
            bump, [0.3], [0.3], ou_model, 1.0, grid_64, 2000, seed
        )
        assert report.density_mean.mean == 1.0
        assert report.verdict == "pass"

    def test_driftless_identity(self, free_model, grid_256, seed, bump):
        report = change_of_measure_check(
            bump, [0.3], [0.0], free_model, 1.0, grid_256, N_PATHS, seed
        )
        mean, var = terminal_law(free_model, 0.0, grid_256)
        exact = gaussian_expectation(bump, mean, var)
        assert within(report.plain, exact)
        assert within(report.weighted, exact)
        assert report.verdict == "pass"

    def test_linear_identity(self, ou_model, grid_256, seed, bump):
        report = change_of_measure_check(
            bump, [0.25], [0.0], ou_model, 1.0, grid_256, N_PATHS, seed
        )
        assert abs(report.difference) <= 3.0 * report.combined_se
        assert report.verdict == "pass"


class TestFeller:
    def test_zero_radius_and_constant(self, ou_model, grid_64, seed, bump):
        report = feller_diagnostic(
            bump, [0.0], [0.0], ou_model, 1.0, grid_64, 200, seed
        )
        assert report.rows[0].max_difference == 0.0
        assert report.rows[0].modulus == 0.0
        flat = feller_diagnostic(
            ConstantFunction(value=1.0),
            [0.0],
            [0.1, 0.5],
            ou_model,
            1.0,
            grid_64,
            200,
            seed,
        )
        assert all(row.max_difference == 0.0 for row in flat.rows)

    def test_ou_differences_shrink(self, ou_model, grid_256, seed, bump):
        radii = [1.0, 0.5, 0.1, 0.0]
        report = feller_diagnostic(
            bump, [0.0], radii, ou_model, 1.0, grid_256, 2000, seed
        )
        assert [row.radius for row in report.rows] == sorted(radii)
        assert report.monotone
        widest = report.rows[-1]
        law = [terminal_law(ou_model, z, grid_256) for z in (0.0, 1.0, -1.0)]
        base = gaussian_expectation(bump, *law[0])
        exact = max(abs(gaussian_expectation(bump, *moved) - base) for moved in law[1:])
        assert abs(widest.max_difference - exact) <= 3.0 * widest.se + 1e-3
        assert all(row.max_difference <= row.modulus for row in report.rows[1:])
