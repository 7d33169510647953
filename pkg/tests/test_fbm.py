import numpy as np
import pytest
from numpy.linalg import LinAlgError
from scipy.stats import ks_2samp

from src._shared.errors import DomainError, InvalidGridError, InvalidInputError
from src._shared.rng import RngSeed
from src.fbm import sampling
from src.fbm.diagnostics import holder_norm, write_csv
from src.fbm.models import FbmPath
from src.fbm.sampling import (
    covariance,
    sample_direct,
    sample_direct_batch,
    sample_volterra,
    sample_volterra_batch,
    volterra_covariance,
    volterra_transform,
)
from src.fraccalc.models import TimeGrid


class TestCovariance:
    @pytest.mark.parametrize("H", [0.3, 0.5, 0.7, 0.9])
    def test_unit_time(self, H):
        assert covariance(1.0, 1.0, H) == pytest.approx(1.0)

    def test_brownian_case_is_min(self):
        assert covariance(2.0, 3.0, 0.5) == pytest.approx(2.0)

    def test_closed_form(self):
        assert covariance(1.0, 2.0, 0.75) == pytest.approx(np.sqrt(2.0))

    def test_broadcasts(self):
        t = np.array([0.5, 1.0])
        matrix = covariance(t[:, None], t[None, :], 0.5)
        np.testing.assert_allclose(matrix, [[0.5, 0.5], [0.5, 1.0]])

    def test_rejects_negative_time(self):
        with pytest.raises(DomainError):
            covariance(-1.0, 1.0, 0.7)


class TestSampleDirect:
    def test_brownian_increments(self, seed):
        grid = TimeGrid.uniform(1.0, 16)
        batch = sample_direct_batch(grid, 0.5, 1, seed, 4000)
        scaled = np.diff(batch.values[:, :, 0], axis=1) / np.sqrt(grid.steps)
        assert scaled.var() == pytest.approx(1.0, rel=0.03)
        lag_one = np.mean(scaled[:, 1:] * scaled[:, :-1])
        assert abs(lag_one) < 4 / np.sqrt(scaled[:, 1:].size)

    def test_terminal_variance(self, grid_256, seed):
        batch = sample_direct_batch(grid_256, 0.7, 1, seed, 10_000)
        assert batch.values[:, -1, 0].var() == pytest.approx(1.0, rel=0.05)

    def test_components_uncorrelated(self, grid_256, seed):
        batch = sample_direct_batch(grid_256, 0.7, 2, seed, 5000)
        corr = np.corrcoef(batch.values[:, -1, 0], batch.values[:, -1, 1])[0, 1]
        assert abs(corr) < 4 / np.sqrt(5000)

    def test_starts_at_zero_without_wiener(self, grid_64, seed):
        path = sample_direct(grid_64, 0.7, 3, seed)
        assert path.wiener is None
        assert np.all(path.values[0] == 0.0)
        assert path.values.shape == (65, 3)

    def test_failed_factorization_is_a_grid_error(self, monkeypatch):
        def not_positive_definite(*args, **kwargs):
            raise LinAlgError("leading minor not positive definite")

        monkeypatch.setattr(sampling, "cholesky", not_positive_definite)
        sampling._cholesky_factor.cache_clear()
        with pytest.raises(InvalidGridError):
            sample_direct(TimeGrid.uniform(1.0, 5), 0.7, 1, RngSeed(master=1))
        sampling._cholesky_factor.cache_clear()


class TestSampleVolterra:
    def test_half_is_wiener_partial_sums(self, grid_64, seed):
        path = sample_volterra(grid_64, 0.5, 2, seed)
        np.testing.assert_allclose(path.values, path.wiener.values, atol=1e-13)

    def test_construction_identity(self, grid_64, seed):
        path = sample_volterra(grid_64, 0.7, 2, seed)
        rebuilt = volterra_transform(grid_64, 0.7, path.wiener.increments[None])[0]
        np.testing.assert_array_equal(path.values, rebuilt)

    def test_terminal_variance(self, grid_256, seed):
        batch = sample_volterra_batch(grid_256, 0.7, 1, seed, 10_000)
        assert batch.values[:, -1, 0].var() == pytest.approx(1.0, rel=0.07)

    def test_covariance_at_half_horizon(self, grid_256, seed):
        batch = sample_volterra_batch(grid_256, 0.7, 1, seed, 10_000)
        mid = grid_256.size // 2
        empirical = np.mean(batch.values[:, mid, 0] * batch.values[:, -1, 0])
        assert empirical == pytest.approx(covariance(0.5, 1.0, 0.7), rel=0.07)

    @pytest.mark.slow
    def test_routes_agree_in_law(self, grid_256):
        direct = sample_direct_batch(grid_256, 0.7, 1, RngSeed(master=11), 5000)
        volterra = sample_volterra_batch(grid_256, 0.7, 1, RngSeed(master=12), 5000)
        result = ks_2samp(direct.values[:, -1, 0], volterra.values[:, -1, 0])
        assert result.pvalue > 0.01


class TestVolterraCovariance:
    @pytest.mark.parametrize("H", [0.6, 0.7, 0.8])
    def test_kernel_square_identity(self, grid_256, H):
        implied = volterra_covariance(grid_256, H)
        t = grid_256.nodes
        exact = covariance(t[:, None], t[None, :], H)
        mask = t >= 0.25
        block = np.ix_(mask, mask)
        assert np.max(np.abs(implied[block] / exact[block] - 1.0)) < 0.07

    def test_improves_under_refinement(self):
        errors = []
        for n in (32, 128):
            grid = TimeGrid.uniform(1.0, n)
            errors.append(abs(volterra_covariance(grid, 0.7)[-1, -1] - 1.0))
        assert errors[1] < errors[0]


class TestDeterminism:
    def test_same_seed_same_bytes(self, grid_64, seed):
        first = sample_volterra(grid_64, 0.7, 2, seed)
        second = sample_volterra(grid_64, 0.7, 2, seed)
        assert first.values.tobytes() == second.values.tobytes()

    def test_batch_path_is_its_stream(self, grid_64, seed):
        batch = sample_direct_batch(grid_64, 0.7, 1, seed, 5)
        single = sample_direct(grid_64, 0.7, 1, seed.with_stream(seed.stream + 3))
        np.testing.assert_allclose(
            batch.values[3], single.values, rtol=1e-12, atol=1e-14
        )

    def test_worker_count_does_not_change_output(self, grid_64, seed):
        one = sample_volterra_batch(grid_64, 0.7, 1, seed, 700, jobs=1)
        four = sample_volterra_batch(grid_64, 0.7, 1, seed, 700, jobs=4)
        assert one.values.tobytes() == four.values.tobytes()

    @pytest.mark.parametrize("sampler", [sample_direct_batch, sample_volterra_batch])
    def test_empty_ensemble_is_rejected(self, grid_64, seed, sampler):
        with pytest.raises(InvalidInputError, match="at least one"):
            sampler(grid_64, 0.7, 1, seed, 0)


class TestHolderNorm:
    def test_linear_path(self, grid_64):
        path = FbmPath(grid=grid_64, H=0.7, values=2.0 * grid_64.nodes[:, None])
        assert holder_norm(path, 1.0) == pytest.approx(2.0)

    def test_constant_path(self, grid_64):
        path = FbmPath(grid=grid_64, H=0.7, values=np.zeros((65, 2)))
        assert holder_norm(path, 0.5) == 0.0

    def test_scaling_under_refinement(self, seed):
        fine_grid = TimeGrid.uniform(1.0, 1024)
        fine = sample_direct(fine_grid, 0.7, 1, seed)
        coarse_grid = TimeGrid(nodes=fine_grid.nodes[::16])
        coarse = FbmPath(grid=coarse_grid, H=0.7, values=fine.values[::16])

        def growth(lam: float) -> float:
            return holder_norm(fine, lam) / holder_norm(coarse, lam)

        assert np.isfinite(holder_norm(fine, 0.65))
        assert growth(0.75) > growth(0.65)

    def test_rejects_bad_exponent(self, grid_64):
        path = FbmPath(grid=grid_64, H=0.7, values=np.zeros((65, 1)))
        with pytest.raises(DomainError):
            holder_norm(path, 1.5)


def test_write_csv(tmp_path, grid_64, seed):
    path = sample_direct(grid_64, 0.7, 2, seed)
    target = write_csv(path, tmp_path / "fbm.csv")
    lines = target.read_text().splitlines()
    assert lines[0] == "t,b1,b2"
    assert len(lines) == 66
