from typing import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .._shared.ensemble import Estimate
from .._shared.errors import InvalidInputError
from .._shared.rng import RngSeed
from .._shared.verdicts import Verdict
from ..fraccalc.models import FloatArray


class EmpiricalMeasure(BaseModel):
    """Equal-weight atoms, one row per sample."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: FloatArray

    @field_validator("samples")
    @classmethod
    def check_samples(cls, samples: np.ndarray) -> np.ndarray:
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise InvalidInputError(
                f"Expected a nonempty (n, d) sample array, got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("Samples must be finite")
        return samples

    @property
    def size(self) -> int:
        return int(self.samples.shape[0])

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    @property
    def second_moment(self) -> float:
        return float(np.mean(np.sum(self.samples**2, axis=1)))

    def subsample(self, size: int, seed: RngSeed) -> Self:
        """Uniform subsample without replacement (the whole measure if smaller)."""
        if size >= self.size:
            return self
        index = np.sort(seed.generator().choice(self.size, size, replace=False))
        return type(self)(samples=self.samples[index])


class ChainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    x0: list[float]
    n_steps: int = Field(ge=1)
    n_chains: int = Field(ge=1)
    seed: RngSeed


class TailRow(BaseModel):
    """``sup_n mu_n(|x|^2 > r)`` against the Chebyshev bound ``sup_n m_n / r``."""

    radius: float
    mass: float
    chebyshev: float


class TightnessReport(BaseModel):
    step_moments: list[Estimate]
    cesaro_moments: list[float]
    tail: list[TailRow]
    contraction: float | None = None
    moment_bound: float | None = None


class InvarianceReport(BaseModel):
    """``W2(mu, mu P_T)`` against the half-split bootstrap noise floor."""

    distance: float
    noise_floor: float
    ratio: float
    within_floor: bool
    n_samples: int
    seed: int


class EntropyCostReport(BaseModel):
    """Relative entropy of ``(f mu) P_T`` to ``mu`` against ``c(T) W2^2``.

    ``mu = N(0, v_bar)`` is the invariant law of the linear model and
    ``f mu = N(tilt, v_bar)``.
    """

    tilt: float
    v_bar: float
    contraction: float
    lhs: float
    c_T: float
    rhs: float
    margin: float
    verdict: Verdict
    importance: Estimate
    importance_verdict: Verdict
    w2_samples: float
    n_samples: int
