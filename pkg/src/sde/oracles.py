"""Closed-form and quadrature oracles for the scalar linear model.

Both rest on the second-moment kernel ``H(2H-1)|s-r|^{2H-2}`` of fBm
increments for ``H > 1/2``.
"""

import math

import numpy as np
from scipy.integrate import dblquad, quad

from .._shared.errors import InvalidInputError, UnsupportedParameterError
from ..fbm.sampling import covariance
from ..fraccalc.models import TimeGrid
from .models import LinearDrift, ModelSpec


def _check_hurst(H: float) -> None:
    if not 0.5 < H < 1.0:
        raise UnsupportedParameterError(f"Oracle needs 1/2 < H < 1, got {H}")


def linear_noise_variance(lam: float, T: float, H: float, sigma: float = 1.0) -> float:
    """``Var int_0^T e^{-lam(T-s)} sigma dB_s``.

    The double integral over ``[0, T]^2`` collapses onto the lag
    ``tau = |s - r|``, which leaves one weakly singular integral handled by
    QUADPACK's algebraic weight.
    """
    _check_hurst(H)

    def window(tau: float) -> float:
        if lam == 0.0:
            return T - tau
        return -math.expm1(-2.0 * lam * (T - tau)) / (2.0 * lam)

    value, _ = quad(
        lambda tau: math.exp(-lam * tau) * window(tau),
        0.0,
        T,
        weight="alg",
        wvar=(2.0 * H - 2.0, 0.0),
        epsabs=1e-13,
        epsrel=1e-11,
    )
    return sigma**2 * 2.0 * H * (2.0 * H - 1.0) * value


def linear_noise_variance_dblquad(
    lam: float, T: float, H: float, sigma: float = 1.0
) -> float:
    """Same variance through ``B_T - lam int e^{-lam(T-s)} B_s ds``.

    Integration by parts trades the singular kernel for the continuous
    covariance, so this is an independent route for cross-checks.
    """
    _check_hurst(H)
    single, _ = quad(
        lambda s: math.exp(-lam * (T - s)) * covariance(T, s, H), 0.0, T
    )
    double, _ = dblquad(
        lambda r, s: math.exp(-lam * (2.0 * T - s - r)) * covariance(s, r, H),
        0.0,
        T,
        0.0,
        T,
        epsabs=1e-11,
        epsrel=1e-9,
    )
    return sigma**2 * (T ** (2.0 * H) - 2.0 * lam * single + lam**2 * double)


def discrete_linear_law(
    model: ModelSpec, x0: float, grid: TimeGrid, noise_cov: np.ndarray
) -> tuple[float, float]:
    """Exact mean and variance of the Euler terminal state, scalar linear drift.

    Args:
        model: One-dimensional model with linear drift and any sigma family.
        x0: Initial state.
        grid: Solver grid.
        noise_cov: Covariance of the noise at the nodes, e.g. ``R_H`` or the
            implied covariance of the Volterra route.

    Returns:
        ``(mean, variance)`` of ``X_T``.
    """
    if model.d != 1 or not isinstance(model.drift, LinearDrift):
        raise UnsupportedParameterError("Needs a one-dimensional linear drift")
    if noise_cov.shape != (grid.size, grid.size):
        raise InvalidInputError(
            f"Noise covariance must be {grid.size}x{grid.size}, got {noise_cov.shape}"
        )
    t = grid.nodes[:-1]
    h = grid.steps
    gain = 1.0 + model.drift.matrix[0, 0] * h
    tail_products = np.cumprod(gain[::-1])[::-1]
    carry = np.append(tail_products[1:], 1.0)

    offsets = np.array([model.drift.offset_at(s, 1)[0] for s in t])
    mean = tail_products[0] * x0 + float(carry @ (offsets * h))

    weights = carry * model.sigma_diag(t)[:, 0]
    diff = np.diff(np.eye(grid.size), axis=0)
    increment_cov = diff @ noise_cov @ diff.T
    return float(mean), float(weights @ increment_cov @ weights)
