"""Riemann-Liouville integrals, Weyl derivatives and the Zahle pairing.

Every operator is a dense lower-triangular matrix acting on nodal values.
Matrices are built by product integration: on each cell the piecewise-linear
interpolant of ``f`` is integrated exactly against the singular kernel.
Right-sided operators are the left-sided ones in reflected time
``tau = T - t`` and return the real bracket, without the ``(-1)^alpha`` phase.
"""

import logging
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from .._shared.errors import DomainError, InvalidInputError
from .models import (
    FracOrder,
    SampledFunction,
    TimeGrid,
    as_derivative_order,
    as_order,
)

logger = logging.getLogger(__name__)


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


def _cell_offsets(grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Distances ``a = t_k - t_{j+1}`` and ``b = t_k - t_j`` clipped at 0.

    Rows are evaluation nodes ``k``, columns cells ``j``; cells at or beyond
    ``k`` get ``a = b = 0`` and therefore zero weight.
    """
    t = grid.nodes
    a = np.clip(t[:, None] - t[None, 1:], 0.0, None)
    b = np.clip(t[:, None] - t[None, :-1], 0.0, None)
    return a, b


@lru_cache(maxsize=64)
def rl_left_matrix(grid: TimeGrid, alpha: float) -> np.ndarray:
    """Matrix of ``I_{0+}^alpha`` on ``grid``."""
    logger.debug("Building I^%.4f matrix on %d nodes", alpha, grid.size)
    a, b = _cell_offsets(grid)
    h = grid.steps[None, :]
    total = (b**alpha - a**alpha) / alpha
    upper = (b * total - (b ** (alpha + 1) - a ** (alpha + 1)) / (alpha + 1)) / h

    matrix = np.zeros((grid.size, grid.size))
    matrix[:, :-1] += total - upper
    matrix[:, 1:] += upper
    return _frozen(matrix / gamma(alpha))


@lru_cache(maxsize=64)
def weyl_singular_matrix(grid: TimeGrid, alpha: float) -> np.ndarray:
    """Matrix of ``x -> int_0^x (f(x) - f(y)) (x - y)^{-alpha-1} dy``.

    ``f`` is linear on every cell; with ``s_j`` the cell slope the integrand
    splits into ``(f_k - f_{j+1} - s_j a) z^{-alpha-1} + s_j z^{-alpha}``,
    both integrated in closed form. The first part vanishes on the cell
    touching ``x`` (``a = 0``).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"Weyl derivative needs 0 < alpha < 1, got {alpha}")
    a, b = _cell_offsets(grid)
    h = grid.steps[None, :]
    active = b > 0.0
    far = a > 0.0

    inv_a = np.zeros_like(a)
    inv_b = np.zeros_like(b)
    np.power(a, -alpha, out=inv_a, where=far)
    np.power(b, -alpha, out=inv_b, where=active)
    near = np.where(far, (inv_a - inv_b) / alpha, 0.0)
    slope = (b ** (1.0 - alpha) - a ** (1.0 - alpha)) / (1.0 - alpha)
    slope_coef = np.where(active, (slope - near * a) / h, 0.0)

    n = grid.size
    matrix = np.zeros((n, n))
    matrix[np.arange(n), np.arange(n)] += near.sum(axis=1)
    matrix[:, 1:] += slope_coef - near
    matrix[:, :-1] -= slope_coef
    return _frozen(matrix)


@lru_cache(maxsize=64)
def weyl_left_matrix(grid: TimeGrid, alpha: float) -> np.ndarray:
    """Matrix of ``D_{0+}^alpha``; row 0 is the zero limit convention."""
    t = grid.nodes
    boundary = np.zeros(grid.size)
    boundary[1:] = t[1:] ** -alpha
    matrix = np.diag(boundary) + alpha * weyl_singular_matrix(grid, alpha)
    matrix[0, :] = 0.0
    return _frozen(matrix / gamma(1.0 - alpha))


def _reflect(matrix: np.ndarray) -> np.ndarray:
    return _frozen(np.ascontiguousarray(matrix[::-1, ::-1]))


@lru_cache(maxsize=64)
def rl_right_matrix(grid: TimeGrid, alpha: float) -> np.ndarray:
    return _reflect(rl_left_matrix(grid.reflected(), alpha))


@lru_cache(maxsize=64)
def weyl_right_matrix(grid: TimeGrid, alpha: float) -> np.ndarray:
    return _reflect(weyl_left_matrix(grid.reflected(), alpha))


def _apply(
    matrix: np.ndarray, f: SampledFunction, excluded: tuple[int, ...] = ()
) -> SampledFunction:
    return SampledFunction(grid=f.grid, values=matrix @ f.values, excluded=excluded)


def rl_integral_left(f: SampledFunction, alpha: FracOrder | float) -> SampledFunction:
    """Left Riemann-Liouville integral ``(I_{0+}^alpha f)(t_k)`` at every node."""
    return _apply(rl_left_matrix(f.grid, as_order(alpha)), f)


def rl_integral_right(f: SampledFunction, alpha: FracOrder | float) -> SampledFunction:
    """Right Riemann-Liouville integral ``(I_{T-}^alpha f)(t_k)``, real bracket."""
    return _apply(rl_right_matrix(f.grid, as_order(alpha)), f)


def weyl_derivative_left(
    f: SampledFunction, alpha: FracOrder | float
) -> SampledFunction:
    """Weyl form of ``D_{0+}^alpha f``.

    Node 0 is excluded: the boundary term ``f(x) x^{-alpha}`` diverges there
    unless ``f(0) = 0``, in which case the limit is 0, the value stored.

    Args:
        f: Function sampled on its grid; should be Holder of order > alpha.
        alpha: Order in (0, 1).

    Returns:
        The derivative on the same grid with ``excluded == (0,)``.

    Raises:
        DomainError: If ``alpha`` is 1.
    """
    matrix = weyl_left_matrix(f.grid, as_derivative_order(alpha))
    return _apply(matrix, f, excluded=(0,))


def weyl_derivative_right(
    f: SampledFunction, alpha: FracOrder | float
) -> SampledFunction:
    """Real bracket of ``D_{T-}^alpha f``; the last node is excluded."""
    matrix = weyl_right_matrix(f.grid, as_derivative_order(alpha))
    return _apply(matrix, f, excluded=(f.grid.size - 1,))


def zahle_integral(
    f: SampledFunction, g: SampledFunction, alpha: FracOrder | float
) -> float:
    """Riemann-Stieltjes integral ``int_0^T <f, dg>`` by fractional pairing.

    ``f`` is split into ``f(0)`` plus a part vanishing at 0. The constant part
    pairs with the right bracket through ``I_{T-}^{1-alpha}`` evaluated at 0,
    which keeps the ``t^{-alpha}`` singularity out of the trapezoidal sum. The
    two real brackets carry a combined phase of ``(-1)^1``, hence the sign.
    """
    f.check_same_grid(g)
    if f.dim != g.dim:
        raise InvalidInputError(f"Dimension mismatch: {f.dim} against {g.dim}")
    order = as_derivative_order(alpha)
    grid = f.grid

    start = f.values[0]
    right = weyl_right_matrix(grid, 1.0 - order) @ (g.values - g.values[-1])
    left = weyl_left_matrix(grid, order) @ (f.values - start)
    singular_part = np.trapezoid(np.sum(left * right, axis=1), grid.nodes)
    boundary_part = start @ (rl_right_matrix(grid, 1.0 - order)[0] @ right)
    return -float(singular_part + boundary_part)
