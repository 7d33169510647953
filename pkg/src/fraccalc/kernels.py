"""The Volterra operator ``K_H`` for ``H >= 1/2``, its inverse, and constants.

``K_H f = I^1_{0+} [s^{beta} I^{beta}_{0+} [s^{-beta} f]]`` with
``beta = H - 1/2``. The kernel is never evaluated pointwise: the inner
integral is integrated exactly per cell with incomplete beta functions and
the outer one by Gauss-Legendre on each cell.
"""

import logging
import math
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.integrate import quad
from scipy.special import beta as beta_fn
from scipy.special import betainc, gamma, roots_jacobi, roots_legendre

from .._shared.errors import UnsupportedParameterError
from .models import SampledFunction, TimeGrid
from .operators import weyl_singular_matrix

logger = logging.getLogger(__name__)

QUAD_POINTS = 8

Piecewise = Literal["linear", "constant"]


def _beta_of(H: float, *, allow_half: bool = True) -> float:
    lower_ok = H >= 0.5 if allow_half else H > 0.5
    if not (lower_ok and H < 1.0):
        bounds = "[1/2, 1)" if allow_half else "(1/2, 1)"
        raise UnsupportedParameterError(f"H must lie in {bounds}, got {H}")
    return H - 0.5


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


def _cumulative_matrix(grid: TimeGrid, piecewise: Piecewise) -> np.ndarray:
    """``K_{1/2}``: the running integral (trapezoid, or exact for cell densities)."""
    h = grid.steps
    n = grid.size
    if piecewise == "constant":
        matrix = np.zeros((n, n - 1))
        matrix[1:] = np.tril(np.ones((n - 1, n - 1))) * h[None, :]
        return matrix
    cells = np.zeros((n - 1, n))
    cells[np.arange(n - 1), np.arange(n - 1)] = h / 2
    cells[np.arange(n - 1), np.arange(1, n)] += h / 2
    matrix = np.zeros((n, n))
    matrix[1:] = np.cumsum(cells, axis=0)
    return matrix


@lru_cache(maxsize=32)
def kh_matrix(grid: TimeGrid, H: float, piecewise: Piecewise = "linear") -> np.ndarray:
    """Matrix of ``K_H`` on ``grid``.

    Args:
        grid: Time grid.
        H: Hurst index in ``[1/2, 1)``.
        piecewise: ``"linear"`` acts on nodal values (shape ``(n, n)``);
            ``"constant"`` acts on one value per cell (shape ``(n, n - 1)``),
            which is how white-noise densities ``dW/dt`` enter.

    Returns:
        Read-only matrix whose row ``k`` gives ``(K_H f)(t_k)``.
    """
    beta = _beta_of(H)
    if beta == 0.0:
        return _frozen(_cumulative_matrix(grid, piecewise))

    logger.info("Building K_H matrix (H=%.3f, %s) on %d nodes", H, piecewise, grid.size)
    t = grid.nodes
    h = grid.steps
    n = grid.size
    x, w = roots_legendre(QUAD_POINTS)
    g0 = gamma(1.0 - beta)
    g1 = gamma(2.0 - beta)

    width = n if piecewise == "linear" else n - 1
    per_cell = np.zeros((n - 1, width))
    for c in range(n - 1):
        u = t[c] + h[c] * (x + 1.0) / 2.0
        weight = w * h[c] / 2.0 * u**beta
        lo = t[None, : c + 1] / u[:, None]
        hi = np.minimum(t[None, 1 : c + 2], u[:, None]) / u[:, None]
        p0 = g0 * (betainc(1.0 - beta, beta, hi) - betainc(1.0 - beta, beta, lo))
        if piecewise == "constant":
            per_cell[c, : c + 1] = weight @ p0
            continue
        p1 = (
            g1
            * u[:, None]
            * (betainc(2.0 - beta, beta, hi) - betainc(2.0 - beta, beta, lo))
        )
        hc = h[None, : c + 1]
        left = (p0 * t[None, 1 : c + 2] - p1) / hc
        right = (p1 - p0 * t[None, : c + 1]) / hc
        per_cell[c, : c + 1] += weight @ left
        per_cell[c, 1 : c + 2] += weight @ right

    matrix = np.zeros((n, width))
    matrix[1:] = np.cumsum(per_cell, axis=0)
    return _frozen(matrix)


def kh_apply(f: SampledFunction, H: float) -> SampledFunction:
    """Apply ``K_H`` (``1/2 <= H < 1``) to nodal values of ``f``."""
    return SampledFunction(grid=f.grid, values=kh_matrix(f.grid, H) @ f.values)


def _weighted_moment(beta: float, power: int) -> float:
    """``int_0^1 s^power (s^{-beta} - 1)(1 - s)^{-1-beta} ds``.

    Adaptive quadrature with the algebraic weight ``s^{-beta}(1-s)^{-beta}``
    absorbing both endpoint singularities; the remaining factor
    ``s^power (1 - s^beta)/(1 - s)`` is bounded, with limits 1 (or 0) at
    ``s = 0`` and ``beta`` at ``s = 1``.
    """

    def bounded(s: float) -> float:
        if s <= 0.0:
            return 1.0 if power == 0 else 0.0
        if s >= 1.0:
            return beta
        return -(s**power) * math.expm1(beta * math.log(s)) / (1.0 - s)

    value, _ = quad(
        bounded,
        0.0,
        1.0,
        weight="alg",
        wvar=(-beta, -beta),
        epsabs=1e-13,
        epsrel=1e-12,
    )
    return float(value)


def c0_constant(H: float) -> float:
    """``C_0 = int_0^1 (s^{1/2-H} - 1)(1 - s)^{-1/2-H} ds`` for ``1/2 < H < 1``."""
    return _weighted_moment(_beta_of(H, allow_half=False), 0)


def c1_constant(H: float) -> float:
    """First moment ``int_0^1 s (s^{1/2-H} - 1)(1 - s)^{-1/2-H} ds``."""
    return _weighted_moment(_beta_of(H, allow_half=False), 1)


def volterra_variance(H: float) -> float:
    """Variance at ``t = 1`` of ``int K_H(1, s) dW_s`` for the composition kernel.

    ``V_H = B(2 - 2H, H - 1/2) / (H (2H - 1) Gamma(H - 1/2)^2)``; tends to 1
    as ``H -> 1/2``.
    """
    beta = _beta_of(H)
    if beta == 0.0:
        return 1.0
    return float(beta_fn(1.0 - 2.0 * beta, beta) / (H * 2.0 * beta * gamma(beta) ** 2))


def _first_cell_moments(
    r: float, t1: float, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[0, t1]`` for ``int F(theta) w(theta) d theta``.

    Returns quadrature nodes and the combined weights of the kernel
    ``w = (r^{-beta} - theta^{-beta})(r - theta)^{-1-beta}``, with the
    ``theta^{-beta}`` part integrated by Gauss-Jacobi.
    """
    xl, wl = roots_legendre(QUAD_POINTS)
    xj, wj = roots_jacobi(QUAD_POINTS, 0.0, -beta)
    half = t1 / 2.0
    theta_l = half * (xl + 1.0)
    theta_j = half * (xj + 1.0)
    smooth = half * wl * r**-beta * (r - theta_l) ** (-1.0 - beta)
    singular = -(half ** (1.0 - beta)) * wj * (r - theta_j) ** (-1.0 - beta)
    return np.concatenate([theta_l, theta_j]), np.concatenate([smooth, singular])


def _last_cell_moments(
    r: float, start: float, beta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Same for ``[start, r]`` where ``w = q(theta)(r - theta)^{-beta}``.

    ``q = (r^{-beta} - theta^{-beta})/(r - theta)`` is a smooth divided
    difference, evaluated through ``expm1``/``log1p`` near the diagonal.
    """
    xj, wj = roots_jacobi(QUAD_POINTS, -beta, 0.0)
    half = (r - start) / 2.0
    theta = start + half * (xj + 1.0)
    gap = r - theta
    q = theta**-beta * np.expm1(beta * np.log1p(-gap / r)) / gap
    return theta, half ** (1.0 - beta) * wj * q


@lru_cache(maxsize=32)
def power_difference_matrix(grid: TimeGrid, H: float) -> np.ndarray:
    """Matrix of ``r -> int_0^r (r^{-beta} - theta^{-beta})(r - theta)^{-1-beta} u``.

    Product integration against the piecewise-linear interpolant of ``u``.
    The first cell after 0 uses the exact constants ``C_0`` and the first
    moment; later rows split the kernel into a first cell, interior cells
    and a last cell.
    """
    beta = _beta_of(H, allow_half=False)
    t = grid.nodes
    h = grid.steps
    n = grid.size
    xl, wl = roots_legendre(QUAD_POINTS)
    matrix = np.zeros((n, n))

    scale = t[1] ** (-2.0 * beta)
    c0, c1 = c0_constant(H), c1_constant(H)
    matrix[1, 0] = -scale * (c0 - c1)
    matrix[1, 1] = -scale * c1

    for k in range(2, n):
        r = t[k]
        pieces = [
            (0, *_first_cell_moments(r, t[1], beta)),
            (k - 1, *_last_cell_moments(r, t[k - 1], beta)),
        ]
        if k > 2:
            cells = np.arange(1, k - 1)
            theta = t[cells, None] + h[cells, None] * (xl[None, :] + 1.0) / 2.0
            weight = (
                h[cells, None]
                / 2.0
                * wl[None, :]
                * (r**-beta - theta**-beta)
                * (r - theta) ** (-1.0 - beta)
            )
            hat = (theta - t[cells, None]) / h[cells, None]
            upper = np.sum(weight * hat, axis=1)
            matrix[k, cells] += weight.sum(axis=1) - upper
            matrix[k, cells + 1] += upper
        for j, theta, weight in pieces:
            hat = (theta - t[j]) / h[j]
            upper = float(weight @ hat)
            matrix[k, j] += weight.sum() - upper
            matrix[k, j + 1] += upper
    return _frozen(matrix)


@lru_cache(maxsize=32)
def kh_inverse_matrix(grid: TimeGrid, H: float) -> np.ndarray:
    """Matrix of ``h' -> K_H^{-1} h`` on nodal values of ``h'``.

    Rows ``k >= 1`` assemble the boundary, power-weight-difference and
    increment terms; row 0 holds the first-cell mean of the leading
    singular term.
    """
    beta = _beta_of(H, allow_half=False)
    logger.info("Building K_H^-1 matrix (H=%.3f) on %d nodes", H, grid.size)
    t = grid.nodes
    n = grid.size
    r_neg = np.zeros(n)
    r_pos = np.zeros(n)
    r_neg[1:] = t[1:] ** -beta
    r_pos[1:] = t[1:] ** beta

    matrix = (
        np.diag(r_neg)
        + beta * r_pos[:, None] * power_difference_matrix(grid, H)
        + beta * weyl_singular_matrix(grid, beta)
    ) / gamma(1.0 - beta)
    matrix[0, :] = 0.0
    matrix[0, 0] = (
        gamma(1.0 - beta) / gamma(1.0 - 2.0 * beta) * t[1] ** -beta / (1.0 - beta)
    )
    return _frozen(matrix)


def kh_inverse_apply(hprime: SampledFunction, H: float) -> SampledFunction:
    """``K_H^{-1} h`` from the derivative ``h'`` sampled on its grid.

    Args:
        hprime: Derivative of an absolutely continuous ``h``.
        H: Hurst index in ``[1/2, 1)``; ``H = 1/2`` is the identity.

    Returns:
        ``s^{H-1/2} D^{H-1/2}_{0+} (s^{1/2-H} h')``; node 0 is excluded.
    """
    beta = _beta_of(H)
    if beta == 0.0:
        return hprime
    matrix = kh_inverse_matrix(hprime.grid, H)
    return SampledFunction(
        grid=hprime.grid, values=matrix @ hprime.values, excluded=(0,)
    )
