"""Coupled pair ``(X, Y)``: ``X`` solves the plain equation and ``Y`` adds
the singular drift ``(X - Y)/zeta`` that forces ``Y_T = X_T``.

Only the difference ``D = X - Y`` is integrated. Its linear part is
absorbed exactly by the per-cell factor ``exp(-int dr/zeta)``, which stays
stable as ``zeta -> 0`` and sends ``D`` to 0 on the last cell.
"""

import logging
import math

import numpy as np

from .._shared.errors import InvalidInputError
from ..fbm.models import FbmEnsemble, FbmPath
from ..sde.models import ModelSpec, StatePath
from ..sde.solver import solve_batch
from .models import CoupledBatch, CouplingTrace
from .schedule import CouplingSchedule

logger = logging.getLogger(__name__)


def _check_schedule(model: ModelSpec, schedule: CouplingSchedule) -> None:
    if not math.isclose(schedule.K, model.K, rel_tol=1e-12):
        raise InvalidInputError(
            f"Schedule uses K={schedule.K}, model drift has K={model.K}"
        )
    if not math.isclose(schedule.T, model.T, rel_tol=1e-12):
        raise InvalidInputError(
            f"Schedule horizon {schedule.T} differs from model horizon {model.T}"
        )


def solve_coupled_batch(
    model: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    noise: FbmEnsemble,
    schedule: CouplingSchedule,
) -> CoupledBatch:
    """Coupled runs for every path of a Volterra ensemble."""
    _check_schedule(model, schedule)
    if noise.wiener_increments is None:
        raise InvalidInputError("Coupling needs noise with its Wiener increments")
    grid = noise.grid
    t = grid.nodes
    h = grid.steps

    x_states = solve_batch(model, x, grid, noise.values)
    decay = schedule.cell_decay(t)
    diff = np.empty_like(x_states)
    diff[:, 0] = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    for k in range(grid.size - 1):
        gap = diff[:, k]
        x_k = x_states[:, k]
        pull = model.drift_at(t[k], x_k) - model.drift_at(t[k], x_k - gap)
        diff[:, k + 1] = decay[k] * (gap + pull * h[k])

    u = np.zeros_like(diff)
    scale = model.sigma_diag(t[:-1]) * schedule.zeta(t[:-1])[:, None]
    u[:, :-1] = diff[:, :-1] / scale
    return CoupledBatch(
        grid=grid,
        H=noise.H,
        x_states=x_states,
        diff=diff,
        u=u,
        wiener_increments=noise.wiener_increments,
        schedule=schedule,
    )


def batch_trace(batch: CoupledBatch, i: int, noise: FbmPath) -> CouplingTrace:
    grid = batch.grid
    x_states = batch.x_states[i]
    return CouplingTrace(
        grid=grid,
        x_path=StatePath(grid=grid, states=x_states),
        y_path=StatePath(grid=grid, states=x_states - batch.diff[i]),
        diff_path=batch.diff[i],
        u_path=batch.u[i],
        noise=noise,
        schedule=batch.schedule,
    )


def solve_coupled(
    model: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    noise: FbmPath,
    schedule: CouplingSchedule,
) -> CouplingTrace:
    """Single coupled trace; its ``X`` is bit-identical to ``solve`` on ``noise``."""
    if noise.wiener is None:
        raise InvalidInputError("Coupling needs noise with its Wiener increments")
    if not math.isclose(noise.H, model.H):
        raise InvalidInputError(f"Noise has H={noise.H}, model needs H={model.H}")
    ensemble = FbmEnsemble(
        grid=noise.grid,
        H=noise.H,
        values=noise.values[None],
        wiener_increments=noise.wiener.increments[None],
    )
    batch = solve_coupled_batch(model, x, y, ensemble, schedule)
    return batch_trace(batch, 0, noise)
