from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .._shared.errors import InvalidInputError
from .._shared.rng import RngSeed
from ..fraccalc.models import FloatArray, TimeGrid

__all__ = ["FbmEnsemble", "FbmPath", "RngSeed", "WienerPath"]


class WienerPath(BaseModel):
    """Brownian increments, one row per cell, one column per component."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    increments: FloatArray

    @model_validator(mode="after")
    def check_shape(self) -> Self:
        shape = self.increments.shape
        if len(shape) != 2 or shape[0] != self.grid.size - 1:
            raise InvalidInputError(
                f"Expected ({self.grid.size - 1}, d) increments, got {shape}"
            )
        return self

    @property
    def density(self) -> np.ndarray:
        """Piecewise-constant ``dW/dt`` per cell."""
        return self.increments / self.grid.steps[:, None]

    @property
    def values(self) -> np.ndarray:
        """Partial sums ``W(t_k)`` starting at 0."""
        d = self.increments.shape[1]
        return np.vstack([np.zeros((1, d)), np.cumsum(self.increments, axis=0)])


class FbmPath(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    H: float = Field(gt=0.0, lt=1.0)
    values: FloatArray
    wiener: WienerPath | None = None

    @model_validator(mode="after")
    def check_path(self) -> Self:
        if self.values.shape[:1] != (self.grid.size,) or self.values.ndim != 2:
            raise InvalidInputError(
                f"Expected ({self.grid.size}, d) values, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("fBm path has non-finite values")
        if np.any(self.values[0] != 0.0):
            raise InvalidInputError("fBm path must start at 0")
        if self.wiener is not None:
            if not self.wiener.grid.same_as(self.grid):
                raise InvalidInputError("Wiener path lives on a different grid")
            if self.wiener.increments.shape[1] != self.dim:
                raise InvalidInputError("Wiener path has a different dimension")
        return self

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


class FbmEnsemble(BaseModel):
    """A batch of paths sharing grid and ``H``; path ``i`` used stream ``i``.

    ``values`` has shape ``(paths, nodes, d)``; ``wiener_increments`` is set
    only for the Volterra route.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    H: float = Field(gt=0.0, lt=1.0)
    values: FloatArray
    wiener_increments: FloatArray | None = None

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])

    def path(self, i: int) -> FbmPath:
        wiener = None
        if self.wiener_increments is not None:
            wiener = WienerPath(grid=self.grid, increments=self.wiener_increments[i])
        return FbmPath(grid=self.grid, H=self.H, values=self.values[i], wiener=wiener)
