from collections.abc import Callable

import numpy as np

from src.fraccalc.models import SampledFunction, TimeGrid


def sampled(grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]) -> SampledFunction:
    return SampledFunction(grid=grid, values=fn(grid.nodes))


def tail(grid: TimeGrid, start: float = 0.125) -> np.ndarray:
    """Mask of nodes with ``t >= start * T``."""
    return grid.nodes >= start * grid.T


def rel_sup(approx: np.ndarray, exact: np.ndarray) -> float:
    return float(np.max(np.abs(approx - exact)) / np.max(np.abs(exact)))
