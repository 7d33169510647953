from typing import Annotated, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .._shared.ensemble import Estimate
from .._shared.errors import DomainError, InvalidInputError
from .._shared.verdicts import Verdict
from ..girsanov.models import DensityMomentReport


class _Function(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    def _points(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z[None] if z.ndim == 1 else z

    def log(self, z: np.ndarray) -> np.ndarray:
        return np.log(self(z))


class ConstantFunction(_Function):
    family: Literal["constant"] = "constant"
    value: float = Field(gt=0.0)

    @property
    def floor(self) -> float:
        return self.value

    @property
    def sup_norm(self) -> float:
        return self.value

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.full(self._points(z).shape[0], self.value)


class GaussianBump(_Function):
    """``f(z) = base + exp(-|z - center|^2 / width^2)``."""

    family: Literal["gaussian-bump"] = "gaussian-bump"
    base: float = Field(gt=0.0)
    center: list[float]
    width: float = Field(gt=0.0)

    @property
    def floor(self) -> float:
        return self.base

    @property
    def sup_norm(self) -> float:
        return self.base + 1.0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        points = self._points(z)
        if points.shape[1] != len(self.center):
            raise InvalidInputError(
                f"Bump lives in dimension {len(self.center)}, got {points.shape[1]}"
            )
        dist_sq = np.sum((points - np.asarray(self.center)) ** 2, axis=1)
        return self.base + np.exp(-dist_sq / self.width**2)


class ClippedExponential(_Function):
    """``f(z) = clip(exp(<w, z>), lower, upper)``."""

    family: Literal["clipped-exponential"] = "clipped-exponential"
    weights: list[float]
    lower: float = Field(gt=0.0)
    upper: float

    @model_validator(mode="after")
    def check_clip(self) -> Self:
        if self.upper <= self.lower:
            raise ValueError(f"upper={self.upper} must exceed lower={self.lower}")
        return self

    @property
    def floor(self) -> float:
        return self.lower

    @property
    def sup_norm(self) -> float:
        return self.upper

    def __call__(self, z: np.ndarray) -> np.ndarray:
        points = self._points(z)
        if points.shape[1] != len(self.weights):
            raise InvalidInputError(
                f"Weights live in dimension {len(self.weights)}, got {points.shape[1]}"
            )
        exponent = points @ np.asarray(self.weights)
        # Clip the exponent first so overflow never reaches exp.
        low, high = np.log(self.lower), np.log(self.upper)
        return np.exp(np.clip(exponent, low, high))


TestFunction = Annotated[
    ConstantFunction | GaussianBump | ClippedExponential,
    Field(discriminator="family"),
]


def check_floor(f: ConstantFunction | GaussianBump | ClippedExponential) -> None:
    if not f.floor > 0.0:
        raise DomainError(f"Test function floor must be positive, got {f.floor}")


class HarnackReport(BaseModel):
    """One inequality check on independent ensembles.

    ``lhs`` and ``rhs`` are the raw Monte Carlo means that enter each side;
    ``log_lhs``/``log_rhs`` are the sides on a log scale, the right one
    including the bound. ``margin = log_rhs - log_lhs``.
    """

    check: Literal["log-harnack", "power-harnack"]
    p: float | None = None
    lhs: Estimate
    rhs: Estimate
    bound: float
    log_lhs: float
    log_rhs: float
    margin: float
    margin_se: float
    verdict: Verdict
    n_paths: int
    seeds: dict[str, int]
    density_moment: DensityMomentReport | None = None


class ChangeOfMeasureReport(BaseModel):
    """``E[R f(X_T^x)]`` from the coupling against ``P_T f(y)`` sampled plainly."""

    weighted: Estimate
    plain: Estimate
    difference: float
    combined_se: float
    density_mean: Estimate
    verdict: Verdict
    n_paths: int
    seeds: dict[str, int]


class FellerRow(BaseModel):
    radius: float
    max_difference: float
    se: float
    bound: float
    modulus: float


class FellerReport(BaseModel):
    """``sup |P_T f(y) - P_T f(x)|`` over probe directions, per radius.

    ``modulus`` is ``||f||_inf sqrt(2 B(T, x, y))``, the bound implied by the
    log-Harnack inequality through Pinsker's inequality.
    """

    rows: list[FellerRow]
    monotone: bool
    n_paths: int
    seed: int
