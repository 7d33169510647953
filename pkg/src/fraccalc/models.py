from collections.abc import Callable
from typing import Annotated, Any, Self, override

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
    model_validator,
)

from .._shared.errors import DomainError, InvalidGridError, InvalidInputError


def _as_float_array(value: Any) -> np.ndarray:
    array = np.asarray(value, dtype=float).view()
    array.setflags(write=False)
    return array


# ndarray field that validates from any sequence and dumps as nested lists.
FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]


class TimeGrid(BaseModel):
    """Strictly increasing nodes ``0 = t_0 < ... < t_n = T``.

    Grids are hashable by node bytes so operator matrices can be cached per
    grid. Use :meth:`uniform` to build one.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: FloatArray
    refinement: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_nodes(self) -> Self:
        t = self.nodes
        if t.ndim != 1 or t.size < 4:
            raise InvalidGridError("A grid needs at least 4 nodes in a 1-D array")
        if not np.all(np.isfinite(t)):
            raise InvalidGridError("Grid nodes must be finite")
        if t[0] != 0.0:
            raise InvalidGridError(f"First node must be exactly 0, got {t[0]!r}")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidGridError("Grid nodes must be strictly increasing")
        return self

    @classmethod
    def uniform(cls, T: float, n: int, refinement: int = 0) -> "TimeGrid":
        """``n`` equal cells on ``[0, T]``, optionally refined towards ``T``.

        Refinement adds the nodes ``T - h 2^{-k}`` for ``k = 1..refinement``
        inside the last cell, so the spacing halves as it approaches ``T``.
        """
        if T <= 0.0:
            raise InvalidGridError(f"Horizon must be positive, got {T}")
        if n < 1:
            raise InvalidGridError(f"Need at least one cell, got {n}")
        nodes = np.linspace(0.0, T, n + 1)
        if refinement:
            h = T / n
            extra = T - h * 2.0 ** -np.arange(1, refinement + 1)
            nodes = np.concatenate([nodes[:-1], extra, [T]])
        nodes[-1] = T
        return cls(nodes=nodes, refinement=refinement)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def reflected(self) -> "TimeGrid":
        """Grid of ``tau = T - t``, in increasing order."""
        return TimeGrid(nodes=self.T - self.nodes[::-1], refinement=self.refinement)

    def same_as(self, other: "TimeGrid") -> bool:
        return self.nodes.shape == other.nodes.shape and bool(
            np.array_equal(self.nodes, other.nodes)
        )

    @override
    def __hash__(self) -> int:
        return hash(self.nodes.tobytes())

    @override
    def __eq__(self, other: object) -> bool:
        return isinstance(other, TimeGrid) and self.same_as(other)


class SampledFunction(BaseModel):
    """Values of an ``R^d``-valued function at the nodes of a grid.

    ``values`` always has shape ``(nodes, d)``; a 1-D input is read as
    ``d = 1``. ``excluded`` lists nodes whose value is a limit convention
    rather than a point evaluation.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    values: FloatArray
    excluded: tuple[int, ...] = ()

    @field_validator("values")
    @classmethod
    def as_columns(cls, values: np.ndarray) -> np.ndarray:
        if values.ndim == 1:
            values = values.reshape(-1, 1)
            values.setflags(write=False)
        return values

    @model_validator(mode="after")
    def check_values(self) -> Self:
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise InvalidInputError(
                f"Values must be (nodes, d), got {self.values.shape}"
            )
        if self.values.shape[0] != self.grid.size:
            raise InvalidInputError(
                f"{self.values.shape[0]} values for a grid of {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("Sampled values must be finite")
        return self

    @classmethod
    def from_callable(
        cls, grid: TimeGrid, fn: Callable[[np.ndarray], np.ndarray]
    ) -> "SampledFunction":
        """Sample ``fn`` (vectorized over time) on ``grid``."""
        return cls(grid=grid, values=fn(grid.nodes))

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def check_same_grid(self, other: "SampledFunction") -> None:
        if not self.grid.same_as(other.grid):
            raise InvalidInputError("Operands live on different grids")


class FracOrder(BaseModel):
    """Order of a fractional operator, ``0 < alpha <= 1``.

    Integrals accept the closed end ``alpha = 1``. The Weyl derivatives and the
    Zahle pairing carry ``1 / Gamma(1 - alpha)`` and take their order through
    :func:`as_derivative_order`, which rejects it.
    """

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0.0, le=1.0)


def as_order(alpha: "FracOrder | float") -> float:
    if isinstance(alpha, FracOrder):
        return alpha.alpha
    return FracOrder(alpha=alpha).alpha


def as_derivative_order(alpha: "FracOrder | float") -> float:
    order = as_order(alpha)
    if order >= 1.0:
        raise DomainError(f"Weyl derivative needs 0 < alpha < 1, got {order}")
    return order
