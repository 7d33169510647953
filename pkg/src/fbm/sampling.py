"""Two independent fBm generators: covariance factorization and Volterra.

Path ``i`` of an ensemble is drawn from stream ``seed.stream + i``, so a
batch is the concatenation of single-path draws whatever the chunking.
"""

import logging
import math
from functools import lru_cache

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cholesky

from .._shared.ensemble import concat_chunks, run_chunked
from .._shared.errors import DomainError, InvalidGridError, UnsupportedParameterError
from .._shared.rng import RngSeed
from ..fraccalc.kernels import kh_matrix, volterra_variance
from ..fraccalc.models import TimeGrid
from .models import FbmEnsemble, FbmPath

logger = logging.getLogger(__name__)


def covariance(
    t: float | np.ndarray, s: float | np.ndarray, H: float
) -> float | np.ndarray:
    """``R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2``; broadcasts."""
    if not 0.0 < H < 1.0:
        raise UnsupportedParameterError(f"H must lie in (0, 1), got {H}")
    t_arr, s_arr = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    if np.any(t_arr < 0.0) or np.any(s_arr < 0.0):
        raise DomainError("Covariance is defined for non-negative times only")
    two_h = 2.0 * H
    value = 0.5 * (t_arr**two_h + s_arr**two_h - np.abs(t_arr - s_arr) ** two_h)
    return float(value) if value.ndim == 0 else value


@lru_cache(maxsize=16)
def _cholesky_factor(grid: TimeGrid, H: float) -> np.ndarray:
    t = grid.nodes[1:]
    cov = covariance(t[:, None], t[None, :], H)
    try:
        factor = cholesky(cov, lower=True)
    except LinAlgError as exc:
        raise InvalidGridError(
            f"Covariance on this grid is not positive definite: {exc}"
        ) from exc
    factor.setflags(write=False)
    return factor


def _standard_normals(
    seed: RngSeed, start: int, stop: int, shape: tuple[int, int]
) -> np.ndarray:
    return np.stack(
        [
            seed.with_stream(seed.stream + i).generator().standard_normal(shape)
            for i in range(start, stop)
        ]
    )


def _check_dim(d: int) -> None:
    if d < 1:
        raise DomainError(f"Dimension must be at least 1, got {d}")


def sample_direct_batch(
    grid: TimeGrid,
    H: float,
    d: int,
    seed: RngSeed,
    n_paths: int,
    *,
    jobs: int | None = None,
) -> FbmEnsemble:
    """Gaussian node values with covariance ``R_H`` per component (Cholesky)."""
    _check_dim(d)
    factor = _cholesky_factor(grid, H)
    logger.info(
        "Sampling %d fBm paths by Cholesky (H=%.3f, n=%d)", n_paths, H, grid.size
    )

    def work(start: int, stop: int) -> tuple[np.ndarray]:
        z = _standard_normals(seed, start, stop, (grid.size - 1, d))
        values = np.zeros((stop - start, grid.size, d))
        values[:, 1:] = factor @ z
        return (values,)

    (values,) = concat_chunks(run_chunked(work, n_paths, jobs=jobs))
    return FbmEnsemble(grid=grid, H=H, values=values)


def sample_direct(grid: TimeGrid, H: float, d: int, seed: RngSeed) -> FbmPath:
    return sample_direct_batch(grid, H, d, seed, 1, jobs=1).path(0)


def volterra_transform(
    grid: TimeGrid, H: float, increments: np.ndarray
) -> np.ndarray:
    """fBm values from Wiener increments, ``K_H(dW/dt) / sqrt(V_H)``.

    Works on a single ``(cells, d)`` array or a stack ``(paths, cells, d)``.
    """
    density = increments / grid.steps[:, None]
    scale = 1.0 / math.sqrt(volterra_variance(H))
    return (kh_matrix(grid, H, "constant") @ density) * scale


def sample_volterra_batch(
    grid: TimeGrid,
    H: float,
    d: int,
    seed: RngSeed,
    n_paths: int,
    *,
    jobs: int | None = None,
) -> FbmEnsemble:
    """fBm through the Volterra representation; keeps the Wiener increments."""
    _check_dim(d)
    if not 0.5 <= H < 1.0:
        raise UnsupportedParameterError(f"Volterra route needs 1/2 <= H < 1, got {H}")
    root_h = np.sqrt(grid.steps)[:, None]
    # Build the cached operator once, before worker threads race for it.
    kh_matrix(grid, H, "constant")
    logger.info(
        "Sampling %d fBm paths by Volterra (H=%.3f, n=%d)", n_paths, H, grid.size
    )

    def work(start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        shape = (grid.size - 1, d)
        increments = _standard_normals(seed, start, stop, shape) * root_h
        return volterra_transform(grid, H, increments), increments

    values, increments = concat_chunks(run_chunked(work, n_paths, jobs=jobs))
    return FbmEnsemble(grid=grid, H=H, values=values, wiener_increments=increments)


def sample_volterra(grid: TimeGrid, H: float, d: int, seed: RngSeed) -> FbmPath:
    return sample_volterra_batch(grid, H, d, seed, 1, jobs=1).path(0)


def volterra_covariance(grid: TimeGrid, H: float) -> np.ndarray:
    """Exact covariance matrix of the discrete Volterra route at the nodes.

    ``dW/dt`` on cell ``j`` has variance ``1/h_j``, so the covariance is
    ``M diag(1/h) M^T / V_H``, the discrete analogue of
    ``R_H(t, s) = int K_H(t, r) K_H(s, r) dr``.
    """
    matrix = kh_matrix(grid, H, "constant")
    return (matrix / grid.steps[None, :]) @ matrix.T / volterra_variance(H)
