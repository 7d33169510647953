"""Drift and diffusion families with analytically validated constants.

Each family knows its Lipschitz constant ``K`` and one-sided constant ``L``
(``<x, b(t, x)> <= L |x|^2``). A declared constant may be larger than the
analytic one, never smaller; an omitted one takes the analytic value.
"""

from abc import ABC, abstractmethod
from typing import Annotated, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .._shared.ensemble import Estimate
from .._shared.errors import InvalidInputError
from ..fraccalc.models import FloatArray, TimeGrid

_SLACK = 1e-12


class _Family(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


def _check_declared(name: str, declared: float | None, analytic: float) -> None:
    if declared is not None and declared < analytic - _SLACK:
        raise ValueError(
            f"Declared {name}={declared} is below the analytic value {analytic:.6g}"
        )


class _AffineOffset(_Family):
    offset: list[float] | None = None
    offset_rate: list[float] | None = None

    def offset_at(self, t: float, d: int) -> np.ndarray:
        c = np.zeros(d) if self.offset is None else np.asarray(self.offset)
        if self.offset_rate is not None:
            c = c + t * np.asarray(self.offset_rate)
        return c

    def offset_bound(self, T: float, d: int) -> float:
        """``sup_{t <= T} |c(t)|``; recorded alongside ``L`` for affine offsets."""
        ends = (self.offset_at(0.0, d), self.offset_at(T, d))
        return float(max(np.linalg.norm(c) for c in ends))

    @property
    def has_offset(self) -> bool:
        return any(
            v is not None and np.any(np.asarray(v) != 0.0)
            for v in (self.offset, self.offset_rate)
        )


class LinearDrift(_AffineOffset):
    """``b(t, x) = A x + c(t)`` with ``c(t) = offset + offset_rate * t``."""

    family: Literal["linear"] = "linear"
    A: list[list[float]]
    K: float | None = Field(default=None, ge=0.0)
    L: float | None = None

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float)

    @property
    def analytic_k(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def analytic_l(self) -> float:
        sym = (self.matrix + self.matrix.T) / 2.0
        return float(np.max(np.linalg.eigvalsh(sym)))

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T + self.offset_at(t, self.matrix.shape[0])


class ClippedCubicDrift(_Family):
    """``b(x) = c - c^3`` per component with ``c = clip(x, -rho, rho)``."""

    family: Literal["clipped-cubic"] = "clipped-cubic"
    rho: float = Field(gt=0.0)
    K: float | None = Field(default=None, ge=0.0)
    L: float | None = None

    @property
    def analytic_k(self) -> float:
        return max(1.0, abs(1.0 - 3.0 * self.rho**2))

    @property
    def analytic_l(self) -> float:
        return 1.0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        c = np.clip(x, -self.rho, self.rho)
        return c - c**3


class SinusoidalDrift(_AffineOffset):
    """``b(t, x) = A sin(x) + c(t)``, sine applied per component."""

    family: Literal["sinusoidal"] = "sinusoidal"
    A: list[list[float]]
    K: float | None = Field(default=None, ge=0.0)
    L: float | None = None

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.A, dtype=float)

    @property
    def analytic_k(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    @property
    def analytic_l(self) -> float:
        return self.analytic_k

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.sin(x) @ self.matrix.T + self.offset_at(t, self.matrix.shape[0])


DriftSpec = Annotated[
    LinearDrift | ClippedCubicDrift | SinusoidalDrift, Field(discriminator="family")
]


class _Sigma(_Family, ABC):
    alpha0: float = Field(default=1.0, gt=0.0, le=1.0)
    K_bar: float | None = Field(default=None, ge=0.0)

    @abstractmethod
    def diag(self, t: np.ndarray | float) -> np.ndarray:
        """Diagonal of ``sigma(t)``; shape ``(..., d)``."""

    @abstractmethod
    def extremes(self, T: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-component ``(min |sigma_i|, max |sigma_i|)`` over ``[0, T]``."""

    @abstractmethod
    def inverse_lipschitz(self, T: float) -> float:
        """Lipschitz constant of ``t -> sigma(t)^{-1}`` on ``[0, T]``."""

    def analytic_k_bar(self, T: float) -> float:
        """Holder constant of ``sigma^{-1}`` of order ``alpha0`` on ``[0, T]``."""
        return self.inverse_lipschitz(T) * T ** (1.0 - self.alpha0)

    @property
    def dim(self) -> int:
        return len(self.scale)


class ConstantSigma(_Sigma):
    family: Literal["constant"] = "constant"
    scale: list[float]

    def diag(self, t: np.ndarray | float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.scale), (*np.shape(t), self.dim))

    def extremes(self, T: float) -> tuple[np.ndarray, np.ndarray]:
        s = np.abs(np.asarray(self.scale))
        return s, s

    def inverse_lipschitz(self, T: float) -> float:
        return 0.0


class AffineSigma(_Sigma):
    """``sigma_i(t) = scale_i + rate_i t``."""

    family: Literal["affine"] = "affine"
    scale: list[float]
    rate: list[float]

    def diag(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return np.asarray(self.scale) + np.asarray(self.rate) * t

    def extremes(self, T: float) -> tuple[np.ndarray, np.ndarray]:
        ends = np.stack([self.diag(0.0), self.diag(T)])
        if np.any(ends[0] * ends[1] <= 0.0):
            raise ValueError("Affine sigma crosses zero on [0, T]")
        return np.min(np.abs(ends), axis=0), np.max(np.abs(ends), axis=0)

    def inverse_lipschitz(self, T: float) -> float:
        low, _ = self.extremes(T)
        return float(np.max(np.abs(np.asarray(self.rate)) / low**2))


class SinusoidalSigma(_Sigma):
    """``sigma_i(t) = scale_i + amplitude_i sin(frequency t)`` with ``|a| < |s|``."""

    family: Literal["sinusoidal"] = "sinusoidal"
    scale: list[float]
    amplitude: list[float]
    frequency: float = Field(ge=0.0)

    @model_validator(mode="after")
    def check_amplitude(self) -> Self:
        if np.any(np.abs(self.amplitude) >= np.abs(self.scale)):
            raise ValueError("Sinusoidal sigma needs |amplitude| < |scale|")
        return self

    def diag(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        wave = np.sin(self.frequency * t)
        return np.asarray(self.scale) + np.asarray(self.amplitude) * wave

    def extremes(self, T: float) -> tuple[np.ndarray, np.ndarray]:
        s, a = np.abs(np.asarray(self.scale)), np.abs(np.asarray(self.amplitude))
        return s - a, s + a

    def inverse_lipschitz(self, T: float) -> float:
        s, a = np.abs(np.asarray(self.scale)), np.abs(np.asarray(self.amplitude))
        return float(np.max(a * self.frequency / (s - a) ** 2))


SigmaSpec = Annotated[
    ConstantSigma | AffineSigma | SinusoidalSigma, Field(discriminator="family")
]


class ModelSpec(BaseModel):
    """``dX = b(t, X) dt + sigma(t) dB^H`` on ``[0, T]`` in ``R^d``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    H: float = Field(gt=0.5, lt=1.0)
    d: int = Field(ge=1)
    T: float = Field(gt=0.0)
    drift: DriftSpec
    sigma: SigmaSpec

    @model_validator(mode="after")
    def check_constants(self) -> Self:
        matrix = getattr(self.drift, "matrix", None)
        if matrix is not None and matrix.shape != (self.d, self.d):
            raise ValueError(
                f"Drift matrix must be {self.d}x{self.d}, got {matrix.shape}"
            )
        for name in ("offset", "offset_rate"):
            value = getattr(self.drift, name, None)
            if value is not None and len(value) != self.d:
                raise ValueError(f"Drift {name} must have length {self.d}")
        if self.sigma.dim != self.d:
            raise ValueError(
                f"Sigma has {self.sigma.dim} components, expected {self.d}"
            )
        low, _ = self.sigma.extremes(self.T)
        if np.any(low <= 0.0):
            raise ValueError("Sigma must stay invertible on [0, T]")
        if self.sigma.alpha0 <= self.H - 0.5:
            raise ValueError(f"alpha0={self.sigma.alpha0} must exceed H - 1/2")
        _check_declared("K", self.drift.K, self.drift.analytic_k)
        if not getattr(self.drift, "has_offset", False):
            _check_declared("L", self.drift.L, self.drift.analytic_l)
        _check_declared("K_bar", self.sigma.K_bar, self.sigma.analytic_k_bar(self.T))
        return self

    @property
    def K(self) -> float:
        declared = self.drift.K
        return self.drift.analytic_k if declared is None else declared

    @property
    def L(self) -> float:
        declared = self.drift.L
        return self.drift.analytic_l if declared is None else declared

    @property
    def K_bar(self) -> float:
        declared = self.sigma.K_bar
        return self.sigma.analytic_k_bar(self.T) if declared is None else declared

    @property
    def alpha0(self) -> float:
        return self.sigma.alpha0

    @property
    def sigma_norm(self) -> float:
        return float(np.max(self.sigma.extremes(self.T)[1]))

    @property
    def sigma_inv_norm(self) -> float:
        return float(1.0 / np.min(self.sigma.extremes(self.T)[0]))

    @property
    def offset_bound(self) -> float:
        bound = getattr(self.drift, "offset_bound", None)
        return 0.0 if bound is None else bound(self.T, self.d)

    @property
    def is_scalar_linear(self) -> bool:
        return (
            self.d == 1
            and isinstance(self.drift, LinearDrift)
            and isinstance(self.sigma, ConstantSigma)
        )

    def with_horizon(self, T: float) -> "ModelSpec":
        return ModelSpec.model_validate({**self.model_dump(), "T": T})

    def drift_at(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.drift(t, x)

    def sigma_diag(self, t: np.ndarray | float) -> np.ndarray:
        return self.sigma.diag(t)


class StatePath(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    states: FloatArray

    @model_validator(mode="after")
    def check_states(self) -> Self:
        if self.states.shape[:1] != (self.grid.size,) or self.states.ndim != 2:
            raise InvalidInputError(
                f"Expected ({self.grid.size}, d) states, got {self.states.shape}"
            )
        if not np.all(np.isfinite(self.states)):
            raise InvalidInputError("State path has non-finite values")
        return self

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


class MomentRow(BaseModel):
    x: list[float]
    second_moment: Estimate
    scale: float
    ratio: float


class MomentReport(BaseModel):
    """Per-point ``E|X_T^x|^2 / (e^{2LT}(1 + |x|^2))`` and its maximum."""

    rows: list[MomentRow]
    max_ratio: float


class YoungEnergyReport(BaseModel):
    """Both sides of ``|X_T|^2 = |x|^2 + 2 int <X, b> dt + 2 int <sigma X, dB>``.

    The noise integral is evaluated twice: by fractional pairing and by a
    left-point Riemann-Stieltjes sum.
    """

    lhs: float
    drift_term: float
    noise_term_pairing: float
    noise_term_riemann: float
    residual_pairing: float
    residual_riemann: float
