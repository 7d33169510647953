import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from src._shared.errors import DomainError, InvalidInputError
from src.coupling.schedule import make_schedule
from src.coupling.solver import solve_coupled
from src.fbm.sampling import sample_direct, sample_volterra
from src.fraccalc.kernels import volterra_variance
from src.girsanov.constants import constants_bundle
from src.girsanov.density import (
    apply_shift,
    density_moment,
    entropy_diagnostic,
    log_density,
    martingale_check,
    shift_kh_inverse,
    simulate_density,
)
from tests.helpers import rel_sup, tail

H = 0.7
BETA = H - 0.5


def c0_closed_form(beta: float) -> float:
    return (1.0 - gamma(1.0 - beta) ** 2 / gamma(1.0 - 2.0 * beta)) / beta


def coupled(model, grid, seed, x, y, theta0=1.0):
    noise = sample_volterra(grid, model.H, model.d, seed)
    schedule = make_schedule(model.K, theta0, model.T)
    return solve_coupled(model, np.array([x]), np.array([y]), noise, schedule)


class TestShift:
    def test_zero_drift_shift(self, grid_256):
        u = np.zeros((grid_256.size, 2))
        assert np.all(apply_shift(grid_256, H, u) == 0.0)

    def test_constant_shift_power_rule(self, grid_1024):
        c = np.array([1.5, -0.5])
        u = np.tile(c, (grid_1024.size, 1))
        v = apply_shift(grid_1024, H, u)
        r = grid_1024.nodes
        ratio = gamma(1.0 - BETA) / gamma(1.0 - 2.0 * BETA)
        exact = math.sqrt(volterra_variance(H)) * ratio * np.outer(r**-BETA, c)
        mask = tail(grid_1024)
        mask[-1] = False
        assert rel_sup(v[mask], exact[mask]) <= 1e-2
        assert np.all(v[-1] == 0.0)

    def test_three_term_expansion_at_midpoint(self, grid_1024):
        # u(r) = r; each of the three terms integrated independently by quad.
        r = 0.5
        weight = {"weight": "alg", "wvar": (0.0, -BETA)}

        def power_gap(theta: float) -> float:
            if theta <= 0.0:
                return 0.0
            if theta >= r:
                return -BETA * r**-BETA
            return (r**-BETA - theta**-BETA) * theta / (r - theta)

        boundary = r**-BETA * r
        weighted, _ = quad(power_gap, 0.0, r, **weight)
        increment, _ = quad(lambda theta: 1.0, 0.0, r, **weight)
        expected = (
            boundary + BETA * r**BETA * weighted + BETA * increment
        ) / gamma(1.0 - BETA)
        expected *= math.sqrt(volterra_variance(H))

        u = grid_1024.nodes[:, None].copy()
        v = apply_shift(grid_1024, H, u)
        k = int(np.argmin(np.abs(grid_1024.nodes - r)))
        assert v[k, 0] == pytest.approx(expected, rel=5e-3)


class TestLogDensity:
    def test_bookkeeping_identity(self, ou_model, grid_256, seed):
        trace = coupled(ou_model, grid_256, seed, 0.3, 0.0)
        density = log_density(trace, shift_kh_inverse(trace))
        v = density.v_path[:-1]
        dw = trace.noise.wiener.increments
        ito = np.concatenate([[0.0], np.cumsum(np.sum(v * dw, axis=1))])
        residual = density.log_density + ito + density.quadratic_variation
        assert np.max(np.abs(residual)) <= 1e-12

    def test_equal_starts_give_unit_density(self, ou_model, grid_64, seed):
        trace = coupled(ou_model, grid_64, seed, 0.4, 0.4)
        density = log_density(trace, shift_kh_inverse(trace))
        assert np.all(density.density == 1.0)
        assert density.terminal_density == 1.0

    def test_requires_wiener_increments(self, ou_model, grid_64, seed):
        trace = coupled(ou_model, grid_64, seed, 0.3, 0.0)
        direct = sample_direct(grid_64, H, 1, seed)
        density = shift_kh_inverse(trace)
        with pytest.raises(InvalidInputError):
            log_density(trace.model_copy(update={"noise": direct}), density)

    def test_density_not_accumulated(self, ou_model, grid_64, seed):
        trace = coupled(ou_model, grid_64, seed, 0.3, 0.0)
        with pytest.raises(InvalidInputError):
            _ = shift_kh_inverse(trace).density


class TestDensityEnsemble:
    def test_deterministic_shift_gaussian_law(self, free_model, grid_256, seed):
        schedule = make_schedule(0.0, 1.0, 1.0)
        samples = simulate_density(
            free_model, np.array([0.3]), np.array([0.0]), schedule, grid_256, seed, 5000
        )
        # With b = 0 the shift is the same on every path.
        half_energy = samples.quadratic_variation
        assert np.ptp(half_energy) <= 1e-12 * max(1.0, half_energy[0])
        density = samples.terminal_density
        mean = density.mean()
        se = density.std(ddof=1) / math.sqrt(density.size)
        assert abs(mean - 1.0) <= 3.0 * se
        log_r = samples.log_density[:, -1]
        assert log_r.mean() == pytest.approx(
            -half_energy[0], abs=3.0 * log_r.std(ddof=1) / math.sqrt(log_r.size)
        )
        entropy = density * log_r
        se_entropy = entropy.std(ddof=1) / math.sqrt(entropy.size)
        assert abs(entropy.mean() - half_energy[0]) <= 3.0 * se_entropy

    def test_unit_mean_at_probes(self, ou_model, grid_256, seed):
        schedule = make_schedule(ou_model.K, 1.0, 1.0)
        samples = simulate_density(
            ou_model, np.array([0.25]), np.array([0.0]), schedule, grid_256, seed, 4000
        )
        assert len(samples.probe_times) == 4
        assert samples.probe_times[-1] == 1.0
        density = np.exp(samples.log_density)
        assert np.all(density > 0.0)
        se = density.std(axis=0, ddof=1) / math.sqrt(density.shape[0])
        assert np.all(np.abs(density.mean(axis=0) - 1.0) <= 3.0 * se)
        report = martingale_check(samples)
        assert report.positive
        assert report.verdict == "pass"
        assert [row.time for row in report.rows] == samples.probe_times

    def test_jobs_do_not_change_samples(self, ou_model, grid_64, seed):
        schedule = make_schedule(ou_model.K, 1.0, 1.0)
        args = (ou_model, np.array([0.25]), np.array([0.0]), schedule, grid_64, seed)
        one = simulate_density(*args, 600, jobs=1)
        many = simulate_density(*args, 600, jobs=4)
        assert one.log_density.tobytes() == many.log_density.tobytes()

    def test_entropy_equal_starts(self, ou_model, grid_64, seed):
        schedule = make_schedule(ou_model.K, 1.0, 1.0)
        start = np.array([0.5])
        report = entropy_diagnostic(
            ou_model, start, start, schedule, grid_64, 200, seed
        )
        assert report.entropy.mean == 0.0
        assert report.bound == 0.0
        assert report.margin == 0.0
        assert report.verdict == "pass"

    def test_entropy_below_bound(self, ou_model, grid_256, seed):
        schedule = make_schedule(ou_model.K, 1.0, 1.0)
        report = entropy_diagnostic(
            ou_model, np.array([0.25]), np.array([0.0]), schedule, grid_256, 2000, seed
        )
        assert report.entropy.mean >= 0.0
        assert report.margin > 0.0
        assert report.verdict == "pass"

    def test_density_moment_equal_starts(self, ou_model, grid_64, seed):
        schedule = make_schedule(ou_model.K, 1.0, 1.0)
        start = np.array([0.1])
        samples = simulate_density(ou_model, start, start, schedule, grid_64, seed, 100)
        report = density_moment(samples, 2.0, 0.0)
        assert report.moment.mean == 1.0
        assert report.log_bound == 0.0
        assert report.verdict == "pass"


class TestConstantsBundle:
    def test_reference_golden(self, ou_model):
        pair = constants_bundle(ou_model, 1.0)
        bundle = pair.headline
        assert bundle.variant == "horizon-free"

        # Spreadsheet-style recomputation with the closed form of C0.
        c0 = c0_closed_form(BETA)
        z = 0.5
        energy = 2 * 0.3 * 1.6
        terms = [
            z / 0.6,
            (c0 * BETA) ** 2 * z / 0.6,
            (1.0 / 2.4) ** 2,
            z**2 / energy,
            1.0 / energy,
        ]
        prefactor = 3.0 / gamma(0.8) ** 2 / z**3
        assert bundle.C0 == pytest.approx(c0, rel=1e-9)
        assert bundle.C == pytest.approx(prefactor * sum(terms[:2]), rel=1e-9)
        assert bundle.C_prime == pytest.approx(prefactor * sum(terms[2:]), rel=1e-9)
        assert bundle.C_double_prime == 0.0
        assert bundle.C == pytest.approx(14.8747, rel=1e-4)
        assert bundle.C_prime == pytest.approx(26.1298, rel=1e-4)
        assert bundle.printed_bound(1.0) == pytest.approx(355.93, rel=1e-3)

    def test_bound_depends_on_distance_only(self, ou_model):
        bundle = constants_bundle(ou_model, 1.0).headline
        x, y = np.array([0.7]), np.array([-0.2])
        assert bundle.bound(x, x) == 0.0
        assert bundle.bound(x, y) == pytest.approx(bundle.bound(np.zeros(1), y - x))
        assert bundle.bound(2 * x, 2 * y) == pytest.approx(4 * bundle.bound(x, y))
        scale = bundle.volterra_variance
        assert bundle.bound(x, y) == pytest.approx(scale * bundle.printed_bound(0.81))

    def test_exact_below_horizon_free(self, ou_model):
        pair = constants_bundle(ou_model, 0.5, T=2.0)
        exact, free = pair.exact, pair.horizon_free
        assert exact.T == 2.0
        assert exact.zeta_norm == exact.zeta0 < free.zeta_norm
        for name in ("C", "C_prime", "C_double_prime"):
            assert getattr(exact, name) <= getattr(free, name)

    def test_zero_drift_constant(self, free_model):
        pair = constants_bundle(free_model, 1.0)
        assert pair.horizon_free is None
        bundle = pair.headline
        assert bundle.variant == "exact"
        assert bundle.denominator == pytest.approx((1.0 / 3.0) ** 3)
        assert bundle.terms.drift == 0.0
        assert math.isfinite(bundle.printed_bound(1.0))

    def test_holder_term(self, ou_model):
        model = ou_model.model_copy(
            update={"sigma": ou_model.sigma.model_copy(update={"K_bar": 0.5})}
        )
        bundle = constants_bundle(model, 1.0).headline
        assert bundle.K_bar == 0.5
        assert bundle.C_double_prime > 0.0

    def test_rejects_theta0(self, ou_model):
        with pytest.raises(DomainError):
            constants_bundle(ou_model, 2.0)

    def test_terms_are_itemized_in_json(self, ou_model):
        dumped = constants_bundle(ou_model, 1.0).model_dump()
        terms = dumped["exact"]["terms"]
        assert set(terms) == {
            "boundary",
            "power_difference",
            "schedule_curvature",
            "sigma_holder",
            "drift",
            "singular_drift",
        }
