"""Gauss-Hermite expectations under a scalar Gaussian terminal law."""

import math
from collections.abc import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

HERMITE_ORDER = 96


def gaussian_expectation(
    fn: Callable[[np.ndarray], np.ndarray],
    mean: float,
    variance: float,
    order: int = HERMITE_ORDER,
) -> float:
    """``E fn(Z)`` for ``Z ~ N(mean, variance)``; ``fn`` takes ``(points, 1)``."""
    nodes, weights = hermegauss(order)
    points = mean + math.sqrt(variance) * nodes
    values = fn(points[:, None])
    return float(weights @ values / math.sqrt(2.0 * math.pi))
