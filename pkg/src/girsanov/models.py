from typing import Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .._shared.ensemble import Estimate
from .._shared.errors import InvalidInputError
from .._shared.verdicts import Verdict
from ..fraccalc.models import FloatArray, TimeGrid


class DensityTrace(BaseModel):
    """Girsanov shift ``v`` and, once accumulated, the running ``log R``.

    ``log_density[k]`` is ``log R`` after the first ``k`` cells, so index 0
    is 0 and the last entry is ``log R(T-)``. ``v`` on the node at ``T`` is
    not used and stored as 0.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TimeGrid
    v_path: FloatArray
    log_density: FloatArray | None = None
    quadratic_variation: FloatArray | None = None

    @model_validator(mode="after")
    def check_density(self) -> Self:
        if self.v_path.shape[:1] != (self.grid.size,):
            raise InvalidInputError(
                f"v must have {self.grid.size} rows, got {self.v_path.shape}"
            )
        if not np.all(np.isfinite(self.v_path)):
            raise InvalidInputError("v must be finite")
        if self.log_density is not None and self.log_density[0] != 0.0:
            raise InvalidInputError("log R must start at 0")
        return self

    @property
    def density(self) -> np.ndarray:
        if self.log_density is None:
            raise InvalidInputError("Density has not been accumulated yet")
        return np.exp(self.log_density)

    @property
    def terminal_density(self) -> float:
        return float(self.density[-1])


class DensitySamples(BaseModel):
    """Per-path Girsanov statistics of a coupled ensemble.

    ``log_density`` has one column per probe time; the last probe is
    ``T-``. ``x_terminal`` is the plain solution at ``T``, which equals the
    coupled ``Y_T``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    probe_times: list[float]
    log_density: FloatArray
    quadratic_variation: FloatArray
    x_terminal: FloatArray

    @property
    def terminal_density(self) -> np.ndarray:
        return np.exp(self.log_density[:, -1])


class BracketTerms(BaseModel):
    """The six bracket terms of the energy bound, each with its power of ``T``.

    ``boundary`` and ``power_difference`` carry no ``T``; ``sigma_holder``
    carries ``T^{2 alpha0}``; the other three carry ``T``. Values below are
    the coefficients, i.e. already divided by that power.
    """

    boundary: float
    power_difference: float
    schedule_curvature: float
    sigma_holder: float
    drift: float
    singular_drift: float


class ConstantsBundle(BaseModel):
    """``B(T, x, y) = V_H (C + C'T + C''T^{2 alpha0}) T^{2(1-H)} |x-y|^2 / den``.

    ``den`` is ``(1 - e^{-2KT/3})^3`` when ``K > 0`` and ``zeta^3(0)`` when
    ``K = 0``. ``V_H`` accounts for the unit-variance normalization of the
    sampled fBm; ``printed_bound`` leaves it out.
    """

    variant: Literal["exact", "horizon-free"]
    H: float
    K: float
    K_bar: float
    alpha0: float
    theta0: float
    T: float
    sigma_inv_norm: float
    zeta_norm: float
    zeta0: float
    C0: float
    volterra_variance: float
    prefactor: float
    terms: BracketTerms
    C: float = Field(ge=0.0)
    C_prime: float = Field(ge=0.0)
    C_double_prime: float = Field(ge=0.0)
    denominator: float = Field(gt=0.0)

    def printed_bound(self, distance_sq: float) -> float:
        T = self.T
        holder = self.C_double_prime * T ** (2.0 * self.alpha0)
        inner = self.C + self.C_prime * T + holder
        return inner * T ** (2.0 * (1.0 - self.H)) / self.denominator * distance_sq

    def bound(self, x: np.ndarray, y: np.ndarray) -> float:
        gap = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return self.volterra_variance * self.printed_bound(float(gap @ gap))


class BundlePair(BaseModel):
    """Both evaluations of ``||zeta||``; the horizon-free one is the headline."""

    exact: ConstantsBundle
    horizon_free: ConstantsBundle | None

    @property
    def headline(self) -> ConstantsBundle:
        return self.exact if self.horizon_free is None else self.horizon_free


class EntropyReport(BaseModel):
    entropy: Estimate
    half_energy: Estimate
    bound: float
    margin: float
    verdict: Verdict


class DensityMomentReport(BaseModel):
    """``E R^{p/(p-1)}`` against ``exp(p B / (p-1)^2)``; the bound is kept as a log."""

    p: float
    moment: Estimate
    log_bound: float
    verdict: Verdict


class MartingaleRow(BaseModel):
    time: float
    mean: Estimate
    verdict: Verdict


class MartingaleReport(BaseModel):
    """``E R(t) = 1`` at each probe time, within 3 standard errors."""

    rows: list[MartingaleRow]
    positive: bool
    verdict: Verdict
