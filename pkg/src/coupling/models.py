from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .._shared.errors import InvalidInputError
from ..fbm.models import FbmPath
from ..fraccalc.models import FloatArray, TimeGrid
from ..sde.models import StatePath
from .schedule import CouplingSchedule


class CouplingTrace(BaseModel):
    """One coupled pair ``(X, Y)`` driven by the same noise.

    ``u = sigma^{-1}(X - Y)/zeta`` is stored at every node but only nodes
    up to ``terminal_index`` (the last one before ``T``) are meaningful;
    the row at ``T`` is zero.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    x_path: StatePath
    y_path: StatePath
    diff_path: FloatArray
    u_path: FloatArray
    noise: FbmPath
    schedule: CouplingSchedule

    @model_validator(mode="after")
    def check_shapes(self) -> Self:
        expected = self.x_path.states.shape
        for name in ("diff_path", "u_path"):
            if getattr(self, name).shape != expected:
                raise InvalidInputError(f"{name} must have shape {expected}")
        if not np.all(np.isfinite(self.u_path)):
            raise InvalidInputError("u must be finite at retained nodes")
        return self

    @property
    def terminal_index(self) -> int:
        return self.grid.size - 2

    @property
    def start_gap(self) -> np.ndarray:
        return self.diff_path[0]


class CoupledBatch(BaseModel):
    """Stacked coupled runs ``(paths, nodes, d)``; path ``i`` is stream ``i``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    H: float
    x_states: FloatArray
    diff: FloatArray
    u: FloatArray
    wiener_increments: FloatArray
    schedule: CouplingSchedule

    @property
    def n_paths(self) -> int:
        return int(self.x_states.shape[0])


class EnergyReport(BaseModel):
    """Running energy ``int |X-Y|^2/zeta^4 + |X_s-Y_s|^2/(theta0 zeta^3(s))``.

    ``max_excess`` is the largest relative overshoot above the budget
    ``|x-y|^2/(theta0 zeta^3(0))``; it is 0 when the budget is 0.
    """

    budget: float
    max_excess: float
    violations: int
    slack: float
    passed: bool


class CouplingReport(BaseModel):
    terminal_gap: float
    terminal_time: float
    budget: float
    normalized_gap: list[float]
    success: bool


class CouplingTime(BaseModel):
    """First node where ``|X - Y|`` falls below ``tol |x - y|``, if any."""

    index: int | None
    time: float | None
    weighted_energy: float
