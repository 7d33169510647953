"""Empirical Wasserstein-2 distances.

One dimension uses the quantile coupling; otherwise the exact assignment
problem is solved, which is cubic in the sample count and capped.
"""

import logging
import math
from pathlib import Path

import numpy as np
import ot
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .._shared.errors import SizeLimitError
from .models import EmpiricalMeasure

logger = logging.getLogger(__name__)

EXACT_LIMIT = 512


def w2_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact ``W2`` of one-dimensional measures by sorted pairing.

    Unequal sample counts go through the quantile functions; measures in
    higher dimension are handed to :func:`w2_exact_small`.
    """
    if mu.dim != 1 or nu.dim != 1:
        return w2_exact_small(mu, nu)
    a, b = np.sort(mu.samples[:, 0]), np.sort(nu.samples[:, 0])
    if a.size == b.size:
        return math.sqrt(float(np.mean((a - b) ** 2)))
    cost = float(ot.wasserstein_1d(a, b, p=2, require_sort=False))
    return math.sqrt(max(cost, 0.0))


def w2_exact_small(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact ``W2`` between small empirical measures of any dimension.

    Raises:
        SizeLimitError: If either measure has more than 512 atoms.
    """
    largest = max(mu.size, nu.size)
    if largest > EXACT_LIMIT:
        raise SizeLimitError(
            f"Exact transport is capped at {EXACT_LIMIT} atoms, got {largest}; "
            "subsample first"
        )
    cost = cdist(mu.samples, nu.samples, "sqeuclidean")
    if mu.size == nu.size:
        rows, cols = linear_sum_assignment(cost)
        value = float(cost[rows, cols].mean())
    else:
        a = np.full(mu.size, 1.0 / mu.size)
        b = np.full(nu.size, 1.0 / nu.size)
        value = float(ot.emd2(a, b, cost))
    return math.sqrt(max(value, 0.0))


def write_measure_csv(mu: EmpiricalMeasure, path: Path) -> Path:
    header = ",".join(f"x{i + 1}" for i in range(mu.dim))
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, mu.samples, delimiter=",", header=header, comments="")
    logger.info("Wrote %d atoms to %s", mu.size, path)
    return path
