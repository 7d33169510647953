"""The coupling schedule ``zeta`` and its integrating factor, in closed form.

With ``a = 2K/3`` and ``c = (2 - theta0)/(2K)``::

    zeta(t) = c (1 - e^{a(t - T)})
    int_0^t dr / zeta = (t - (log(1 - e^{a(t-T)}) - log(1 - e^{-aT})) / a) / c

and for ``K = 0`` the limits ``zeta = (2 - theta0)(T - t)/3`` and
``3 log(T / (T - t)) / (2 - theta0)``. Every form satisfies
``3 zeta' - 2K zeta + 2 = theta0``.
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .._shared.errors import DomainError


class CouplingSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    K: float = Field(ge=0.0)
    theta0: float = Field(gt=0.0, lt=2.0)
    T: float = Field(gt=0.0)

    @property
    def _rate(self) -> float:
        return 2.0 * self.K / 3.0

    @property
    def _scale(self) -> float:
        return (2.0 - self.theta0) / (2.0 * self.K)

    def zeta(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.K == 0.0:
            return (2.0 - self.theta0) * (self.T - t) / 3.0
        return -self._scale * np.expm1(self._rate * (t - self.T))

    def zeta_prime(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        slope = -(2.0 - self.theta0) / 3.0
        if self.K == 0.0:
            return np.full_like(t, slope)
        return slope * np.exp(self._rate * (t - self.T))

    def identity_residual(self, t: np.ndarray | float) -> np.ndarray:
        """``3 zeta' - 2K zeta + 2 - theta0``; zero up to rounding."""
        return (
            3.0 * self.zeta_prime(t) - 2.0 * self.K * self.zeta(t) + 2.0 - self.theta0
        )

    def _log_gap(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            if self.K == 0.0:
                return np.log(self.T - t)
            return np.log(-np.expm1(self._rate * (t - self.T)))

    def exponent(self, t: np.ndarray | float) -> np.ndarray:
        """``Phi(t) = int_0^t dr / zeta(r)``; infinite at ``t = T``."""
        t = np.asarray(t, dtype=float)
        return self.exponent_increment(np.zeros_like(t), t)

    def exponent_increment(
        self, start: np.ndarray | float, stop: np.ndarray | float
    ) -> np.ndarray:
        """``Phi(stop) - Phi(start)`` without forming either value."""
        start = np.asarray(start, dtype=float)
        stop = np.asarray(stop, dtype=float)
        log_ratio = self._log_gap(stop) - self._log_gap(start)
        if self.K == 0.0:
            return -3.0 * log_ratio / (2.0 - self.theta0)
        return (stop - start - log_ratio / self._rate) / self._scale

    def cell_decay(self, nodes: np.ndarray) -> np.ndarray:
        """``exp(-int_{t_k}^{t_{k+1}} dr / zeta)`` per cell; 0 on a cell ending at T."""
        return np.exp(-self.exponent_increment(nodes[:-1], nodes[1:]))

    @property
    def sup_norm(self) -> float:
        """``zeta(0)``, the maximum of the nonincreasing schedule."""
        return float(self.zeta(0.0))

    @property
    def sup_bound(self) -> float:
        """Horizon-free majorant ``(2 - theta0)/(2K)`` of ``zeta(0)``."""
        if self.K == 0.0:
            return math.inf
        return self._scale


def make_schedule(K: float, theta0: float, T: float) -> CouplingSchedule:
    if not 0.0 < theta0 < 2.0:
        raise DomainError(f"theta0 must lie in (0, 2), got {theta0}")
    if K < 0.0:
        raise DomainError(f"K must be non-negative, got {K}")
    if T <= 0.0:
        raise DomainError(f"T must be positive, got {T}")
    return CouplingSchedule(K=K, theta0=theta0, T=T)
