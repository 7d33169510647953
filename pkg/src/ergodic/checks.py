"""Invariance and entropy-cost checks for the discrete semigroup."""

import logging
import math

import numpy as np

from .._shared.ensemble import Estimate
from .._shared.errors import UnsupportedParameterError
from .._shared.rng import RngSeed
from .._shared.verdicts import agree, decide
from ..fraccalc.models import TimeGrid
from ..girsanov.constants import constants_bundle
from ..sde.models import ModelSpec
from ..sde.oracles import linear_noise_variance
from ..sde.solver import simulate_terminal
from .models import EmpiricalMeasure, EntropyCostReport, InvarianceReport
from .transport import EXACT_LIMIT, w2_1d

logger = logging.getLogger(__name__)

FLOOR_MULTIPLIER = 2.0
BOOTSTRAP_ROUNDS = 20


def linear_rate(model: ModelSpec) -> float:
    """``lam`` of ``b(x) = -lam x`` for the scalar linear model."""
    if not model.is_scalar_linear or model.drift.has_offset:
        raise UnsupportedParameterError(
            "Closed forms need the scalar linear model b(x) = -lam x, constant sigma"
        )
    lam = -float(model.drift.matrix[0, 0])
    if lam <= 0.0:
        raise UnsupportedParameterError(f"Needs a contracting drift, got lam={lam}")
    return lam


def invariant_variance(model: ModelSpec) -> float:
    """``v_bar = q / (1 - e^{-2 lam T})``, the stationary variance of the chain."""
    lam = linear_rate(model)
    sigma = float(model.sigma.scale[0])
    q = linear_noise_variance(lam, model.T, model.H, sigma)
    return q / -math.expm1(-2.0 * lam * model.T)


def _distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, seed: RngSeed) -> float:
    if mu.dim == 1:
        return w2_1d(mu, nu)
    return w2_1d(
        mu.subsample(EXACT_LIMIT, seed.derive("mu")),
        nu.subsample(EXACT_LIMIT, seed.derive("nu")),
    )


def noise_floor(
    mu: EmpiricalMeasure, seed: RngSeed, rounds: int = BOOTSTRAP_ROUNDS
) -> float:
    """Mean ``W2`` between random halves of ``mu``."""
    if mu.size < 2:
        return 0.0
    half = mu.size // 2
    distances = []
    for i in range(rounds):
        order = seed.generator(i).permutation(mu.size)
        left = EmpiricalMeasure(samples=mu.samples[order[:half]])
        right = EmpiricalMeasure(samples=mu.samples[order[half : 2 * half]])
        distances.append(_distance(left, right, seed.derive(f"split-{i}")))
    return float(np.mean(distances))


def invariance_check(
    mu_hat: EmpiricalMeasure,
    model: ModelSpec,
    grid: TimeGrid,
    seed: RngSeed,
    *,
    jobs: int | None = None,
) -> InvarianceReport:
    """``W2(mu_hat, mu_hat P_T)`` against the bootstrap floor of ``mu_hat``."""
    push_seed = seed.derive("push")
    pushed = simulate_terminal(
        model, mu_hat.samples, grid, push_seed, mu_hat.size, jobs=jobs
    )
    distance = _distance(mu_hat, EmpiricalMeasure(samples=pushed), seed)
    floor = noise_floor(mu_hat, seed.derive("bootstrap"))
    ratio = distance / floor if floor > 0.0 else math.inf
    if distance == 0.0:
        ratio = 0.0
    report = InvarianceReport(
        distance=distance,
        noise_floor=floor,
        ratio=ratio,
        within_floor=ratio <= FLOOR_MULTIPLIER,
        n_samples=mu_hat.size,
        seed=seed.master,
    )
    logger.info(
        "Invariance: W2 %.4g against floor %.4g (ratio %.3g)", distance, floor, ratio
    )
    return report


def entropy_cost_check(
    model: ModelSpec,
    tilt: float,
    theta0: float,
    seed: RngSeed,
    n_samples: int = 10_000,
) -> EntropyCostReport:
    """Entropy-cost inequality for the linear Gaussian model.

    With ``mu = N(0, v_bar)`` and ``f mu = N(m, v_bar)``, the law
    ``(f mu) P_T = N(e^{-lam T} m, v_bar)`` has density ``rho`` relative to
    ``mu`` and ``mu(rho log rho) = e^{-2 lam T} m^2 / (2 v_bar)``. That is
    compared with ``c(T) m^2`` where ``c(T)`` is the bound per unit squared
    distance. The entropy is also estimated by importance weighting on
    samples of ``mu``, and ``W2(mu, f mu) = |m|`` on samples.

    Raises:
        UnsupportedParameterError: For anything but the contracting scalar
            linear model with constant sigma.
    """
    lam = linear_rate(model)
    v_bar = invariant_variance(model)
    contraction = math.exp(-lam * model.T)
    shift = contraction * tilt

    lhs = shift**2 / (2.0 * v_bar)
    c_T = constants_bundle(model, theta0).headline.bound(np.zeros(1), np.ones(1))
    rhs = c_T * tilt**2
    margin = rhs - lhs

    z = math.sqrt(v_bar) * seed.derive("mu").generator().standard_normal(n_samples)
    log_rho = (shift * z - 0.5 * shift**2) / v_bar
    importance = Estimate.from_samples(np.exp(log_rho) * log_rho)

    tilted = seed.derive("f-mu").generator().standard_normal(n_samples)
    moved = math.sqrt(v_bar) * tilted
    w2_samples = w2_1d(
        EmpiricalMeasure(samples=z), EmpiricalMeasure(samples=moved + tilt)
    )
    report = EntropyCostReport(
        tilt=tilt,
        v_bar=v_bar,
        contraction=contraction,
        lhs=lhs,
        c_T=c_T,
        rhs=rhs,
        margin=margin,
        verdict=decide(margin, 0.0),
        importance=importance,
        importance_verdict=agree(importance.mean - lhs, importance.se),
        w2_samples=w2_samples,
        n_samples=n_samples,
    )
    logger.info(
        "Entropy cost at m=%g: %.4g <= %.4g (%s)", tilt, lhs, rhs, report.verdict
    )
    return report
