"""The discrete-time semigroup ``P_T^n`` as a Markov chain.

One step is a fresh solve over ``[0, T]`` on independent noise. Step ``k``
of chain ``i`` draws from stream ``i`` of ``seed.derive(f"step-{k}")``, so
a single chain replays chain 0 of an ensemble.
"""

import logging
import math

import numpy as np

from .._shared.ensemble import Estimate
from .._shared.rng import RngSeed
from ..fraccalc.kernels import kh_matrix
from ..fraccalc.models import TimeGrid
from ..sde.models import ModelSpec, MomentReport
from ..sde.solver import simulate_terminal
from .models import ChainConfig, EmpiricalMeasure, TailRow, TightnessReport

logger = logging.getLogger(__name__)


def _step_seed(seed: RngSeed, step: int) -> RngSeed:
    return seed.derive(f"step-{step}")


def chain_step(
    x: np.ndarray | list[float],
    model: ModelSpec,
    grid: TimeGrid,
    seed: RngSeed,
    step: int = 0,
) -> np.ndarray:
    """One draw from ``P_T(x, .)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return simulate_terminal(model, x, grid, _step_seed(seed, step), 1, jobs=1)[0]


def chain_states(
    cfg: ChainConfig, model: ModelSpec, grid: TimeGrid, *, jobs: int | None = None
) -> np.ndarray:
    """States of every chain, shape ``(chains, steps + 1, d)``; index 0 is ``x0``."""
    kh_matrix(grid, model.H, "constant")
    states = np.empty((cfg.n_chains, cfg.n_steps + 1, model.d))
    states[:, 0] = np.asarray(cfg.x0, dtype=float)
    logger.info(
        "Running %d chains for %d steps (seed %d)",
        cfg.n_chains,
        cfg.n_steps,
        cfg.seed.master,
    )
    for k in range(cfg.n_steps):
        states[:, k + 1] = simulate_terminal(
            model,
            states[:, k],
            grid,
            _step_seed(cfg.seed, k),
            cfg.n_chains,
            jobs=jobs,
        )
    return states


def pool_states(states: np.ndarray) -> EmpiricalMeasure:
    """Cesaro average of the step laws: every state after step 0 of every chain."""
    return EmpiricalMeasure(samples=states[:, 1:].reshape(-1, states.shape[2]))


def krylov_bogoliubov(
    cfg: ChainConfig, model: ModelSpec, grid: TimeGrid, *, jobs: int | None = None
) -> EmpiricalMeasure:
    """``mu_n = (1/n) sum_k delta_{x0} P_T^k`` from ``cfg.n_chains`` chains."""
    return pool_states(chain_states(cfg, model, grid, jobs=jobs))


def contraction_proxy(model: ModelSpec, moments: MomentReport) -> float:
    """``M e^{2LT}`` with the empirical moment constant in place of ``M``."""
    return moments.max_ratio * math.exp(2.0 * model.L * model.T)


def tightness_report(
    states: np.ndarray,
    radii: list[float],
    *,
    contraction: float | None = None,
    moment_scale: float | None = None,
) -> TightnessReport:
    """Second moments per step and Cesaro tail masses of ``|x|^2``.

    Args:
        states: Chain states as returned by :func:`chain_states`.
        radii: Thresholds ``r`` for the mass of ``{|x|^2 > r}``.
        contraction: Per-step contraction ``a`` of the second moment, if known.
        moment_scale: Additive constant of one step's second moment; with
            ``contraction`` it gives the bound ``q/(1-a) + |x0|^2`` on
            every Cesaro moment.
    """
    norms = np.sum(states[:, 1:] ** 2, axis=2)
    n_steps = norms.shape[1]
    counts = np.arange(1, n_steps + 1)
    step_moments = [Estimate.from_samples(norms[:, k]) for k in range(n_steps)]
    cesaro = np.cumsum(norms.mean(axis=0)) / counts
    sup_moment = float(cesaro.max())

    tail = []
    for r in radii:
        mass = np.cumsum((norms > r).mean(axis=0)) / counts
        tail.append(
            TailRow(radius=r, mass=float(mass.max()), chebyshev=sup_moment / r)
        )

    moment_bound = None
    if contraction is not None and moment_scale is not None and contraction < 1.0:
        start = float(np.sum(states[0, 0] ** 2))
        moment_bound = moment_scale / (1.0 - contraction) + start
    return TightnessReport(
        step_moments=step_moments,
        cesaro_moments=cesaro.tolist(),
        tail=tail,
        contraction=contraction,
        moment_bound=moment_bound,
    )
