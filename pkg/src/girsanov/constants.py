"""Constants of the entropy bound, itemized term by term.

The bracket of the bound collects six terms. With ``beta = H - 1/2``,
``s = ||sigma^{-1}||`` and ``z = ||zeta||``::

    boundary            s^2 z / (2(1-H))
    power_difference    (C0 beta s)^2 z / (2(1-H))
    schedule_curvature  ((2-theta0) s / (3(3/2-H)))^2 / theta0          * T
    sigma_holder        (K_bar beta)^2 z / (2(a0-H+1)(a0-H+1/2)^2)      * T^{2 a0}
    drift               (K s z)^2 / (2(1-H)(3-2H) theta0)               * T
    singular_drift      s^2 / (2(1-H)(3-2H) theta0)                     * T

all multiplied by ``3 / (Gamma(3/2-H)^2 zeta^3(0))``. For ``K > 0``,
``zeta(0) = c (1 - e^{-2KT/3})`` so the ``c^3`` part goes into the prefactor
and the rest into the denominator.
"""

import logging
import math
from typing import Literal

from scipy.special import gamma

from ..coupling.schedule import make_schedule
from ..fraccalc.kernels import c0_constant, volterra_variance
from ..sde.models import ModelSpec
from .models import BracketTerms, BundlePair, ConstantsBundle

logger = logging.getLogger(__name__)


def bracket_terms(
    H: float,
    K: float,
    K_bar: float,
    alpha0: float,
    theta0: float,
    sigma_inv_norm: float,
    zeta_norm: float,
    C0: float,
) -> BracketTerms:
    beta = H - 0.5
    s, z = sigma_inv_norm, zeta_norm
    energy = 2.0 * (1.0 - H) * (3.0 - 2.0 * H) * theta0
    return BracketTerms(
        boundary=s**2 * z / (2.0 * (1.0 - H)),
        power_difference=(C0 * beta * s) ** 2 * z / (2.0 * (1.0 - H)),
        schedule_curvature=((2.0 - theta0) * s / (3.0 * (1.5 - H))) ** 2 / theta0,
        sigma_holder=(K_bar * beta) ** 2
        * z
        / (2.0 * (alpha0 - H + 1.0) * (alpha0 - H + 0.5) ** 2),
        drift=(K * s * z) ** 2 / energy,
        singular_drift=s**2 / energy,
    )


def _bundle(
    model: ModelSpec,
    theta0: float,
    zeta_norm: float,
    variant: Literal["exact", "horizon-free"],
) -> ConstantsBundle:
    H, K, T = model.H, model.K, model.T
    schedule = make_schedule(K, theta0, T)
    C0 = c0_constant(H)
    terms = bracket_terms(
        H,
        K,
        model.K_bar,
        model.alpha0,
        theta0,
        model.sigma_inv_norm,
        zeta_norm,
        C0,
    )
    base = 3.0 / gamma(1.5 - H) ** 2
    if K > 0.0:
        scale = (2.0 - theta0) / (2.0 * K)
        prefactor = base / scale**3
        denominator = (-math.expm1(-2.0 * K * T / 3.0)) ** 3
    else:
        prefactor = base
        denominator = schedule.sup_norm**3
    return ConstantsBundle(
        variant=variant,
        H=H,
        K=K,
        K_bar=model.K_bar,
        alpha0=model.alpha0,
        theta0=theta0,
        T=T,
        sigma_inv_norm=model.sigma_inv_norm,
        zeta_norm=zeta_norm,
        zeta0=schedule.sup_norm,
        C0=C0,
        volterra_variance=volterra_variance(H),
        prefactor=prefactor,
        terms=terms,
        C=prefactor * (terms.boundary + terms.power_difference),
        C_prime=prefactor
        * (terms.schedule_curvature + terms.drift + terms.singular_drift),
        C_double_prime=prefactor * terms.sigma_holder,
        denominator=denominator,
    )


def constants_bundle(
    model: ModelSpec, theta0: float, T: float | None = None
) -> BundlePair:
    """Both evaluations of ``||zeta||``: exact ``zeta(0)`` and the majorant ``c``.

    The majorant does not exist for ``K = 0``; the pair then carries only the
    exact bundle, which is also the headline.

    Raises:
        DomainError: If ``theta0`` lies outside ``(0, 2)``.
    """
    if T is not None and T != model.T:
        model = model.with_horizon(T)
    schedule = make_schedule(model.K, theta0, model.T)
    exact = _bundle(model, theta0, schedule.sup_norm, "exact")
    horizon_free = None
    if model.K > 0.0:
        horizon_free = _bundle(model, theta0, schedule.sup_bound, "horizon-free")
    pair = BundlePair(exact=exact, horizon_free=horizon_free)
    logger.info(
        "Constants at H=%.3f, T=%.3g, theta0=%.3g: C=%.4g C'=%.4g C''=%.4g (%s)",
        model.H,
        model.T,
        theta0,
        pair.headline.C,
        pair.headline.C_prime,
        pair.headline.C_double_prime,
        pair.headline.variant,
    )
    return pair
