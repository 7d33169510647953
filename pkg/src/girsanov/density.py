"""Girsanov density of the coupling.

Under ``R dP`` with ``R = exp(-int <v, dW> - 1/2 int |v|^2)`` the noise
driving ``Y`` is again an fBm, where ``K_H v = sqrt(V_H) int u`` and
``u = sigma^{-1}(X - Y)/zeta``. The stochastic integral uses left-point
values of ``v``, which makes the discrete ``R`` an exact martingale.
"""

import logging
import math
from functools import lru_cache

import numpy as np

from .._shared.ensemble import Estimate, concat_chunks, run_chunked
from .._shared.errors import InvalidInputError
from .._shared.rng import RngSeed
from .._shared.verdicts import agree, combine, decide
from ..coupling.models import CoupledBatch, CouplingTrace
from ..coupling.schedule import CouplingSchedule
from ..coupling.solver import solve_coupled_batch
from ..fbm.sampling import sample_volterra_batch
from ..fraccalc.kernels import kh_inverse_matrix, kh_matrix, volterra_variance
from ..fraccalc.models import TimeGrid
from ..sde.models import ModelSpec
from .constants import constants_bundle
from .models import (
    DensityMomentReport,
    DensitySamples,
    DensityTrace,
    EntropyReport,
    MartingaleReport,
    MartingaleRow,
)

logger = logging.getLogger(__name__)

DEFAULT_PROBES = (0.25, 0.5, 0.75)


@lru_cache(maxsize=16)
def shift_matrix(grid: TimeGrid, H: float) -> np.ndarray:
    """``u -> sqrt(V_H) K_H^{-1}(int u)`` on nodal values; the row at ``T`` is 0."""
    matrix = math.sqrt(volterra_variance(H)) * kh_inverse_matrix(grid, H)
    matrix[-1] = 0.0
    matrix.setflags(write=False)
    return matrix


def apply_shift(grid: TimeGrid, H: float, u: np.ndarray) -> np.ndarray:
    """``v`` for one ``(nodes, d)`` array or a stack ``(paths, nodes, d)``."""
    return shift_matrix(grid, H) @ u


def shift_kh_inverse(trace: CouplingTrace) -> DensityTrace:
    """Girsanov shift ``v`` along a coupled trace."""
    v = apply_shift(trace.grid, trace.noise.H, trace.u_path)
    return DensityTrace(grid=trace.grid, v_path=v)


def _accumulate(
    v: np.ndarray, increments: np.ndarray, steps: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Running ``log R`` and ``1/2 int |v|^2`` for stacks ``(paths, nodes, d)``."""
    left = v[:, :-1]
    ito = np.einsum("pkd,pkd->pk", left, increments)
    energy = 0.5 * np.sum(left**2, axis=2) * steps
    n_paths, n_nodes = v.shape[:2]
    log_r = np.zeros((n_paths, n_nodes))
    half_energy = np.zeros((n_paths, n_nodes))
    log_r[:, 1:] = -np.cumsum(ito + energy, axis=1)
    half_energy[:, 1:] = np.cumsum(energy, axis=1)
    return log_r, half_energy


def log_density(trace: CouplingTrace, density: DensityTrace) -> DensityTrace:
    """Accumulate ``log R`` over every cell, the last one ending at ``T``."""
    wiener = trace.noise.wiener
    if wiener is None:
        raise InvalidInputError("Density needs the Wiener increments of the noise")
    log_r, half_energy = _accumulate(
        density.v_path[None], wiener.increments[None], trace.grid.steps
    )
    return DensityTrace(
        grid=density.grid,
        v_path=density.v_path,
        log_density=log_r[0],
        quadratic_variation=half_energy[0],
    )


def density_batch(batch: CoupledBatch) -> tuple[np.ndarray, np.ndarray]:
    """``(log R, 1/2 int |v|^2)`` per path and node of a coupled batch."""
    v = apply_shift(batch.grid, batch.H, batch.u)
    return _accumulate(v, batch.wiener_increments, batch.grid.steps)


def probe_indices(grid: TimeGrid, probes: tuple[float, ...]) -> list[int]:
    """Last node at or before each fraction of ``T``, then the node at ``T``."""
    t = grid.nodes
    found = [int(np.searchsorted(t, f * grid.T, side="right")) - 1 for f in probes]
    return [*found, grid.size - 1]


def simulate_density(
    model: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    schedule: CouplingSchedule,
    grid: TimeGrid,
    seed: RngSeed,
    n_paths: int,
    *,
    probes: tuple[float, ...] = DEFAULT_PROBES,
    jobs: int | None = None,
) -> DensitySamples:
    """Coupled ensemble reduced to ``log R`` at the probes and ``X_T``."""
    index = probe_indices(grid, probes)
    kh_matrix(grid, model.H, "constant")
    shift_matrix(grid, model.H)
    logger.info(
        "Coupled ensemble of %d paths (H=%.3f, theta0=%.3f, n=%d)",
        n_paths,
        model.H,
        schedule.theta0,
        grid.size,
    )

    def work(start: int, stop: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        noise = sample_volterra_batch(
            grid,
            model.H,
            model.d,
            seed.with_stream(seed.stream + start),
            stop - start,
            jobs=1,
        )
        batch = solve_coupled_batch(model, x, y, noise, schedule)
        log_r, half_energy = density_batch(batch)
        return log_r[:, index], half_energy[:, -1], batch.x_states[:, -1]

    log_r, half_energy, terminal = concat_chunks(
        run_chunked(work, n_paths, jobs=jobs)
    )
    return DensitySamples(
        probe_times=[float(grid.nodes[i]) for i in index],
        log_density=log_r,
        quadratic_variation=half_energy,
        x_terminal=terminal,
    )


def entropy_diagnostic(
    model: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    schedule: CouplingSchedule,
    grid: TimeGrid,
    n_paths: int,
    seed: RngSeed,
    *,
    jobs: int | None = None,
) -> EntropyReport:
    """Monte Carlo ``E[R log R]`` at ``T-`` against the headline bound."""
    samples = simulate_density(model, x, y, schedule, grid, seed, n_paths, jobs=jobs)
    log_r = samples.log_density[:, -1]
    entropy = Estimate.from_samples(np.exp(log_r) * log_r)
    bound = constants_bundle(model, schedule.theta0).headline.bound(x, y)
    margin = bound - entropy.mean
    verdict = decide(margin, entropy.se)
    logger.info(
        "E[R log R] = %.4g +- %.2g against bound %.4g: %s",
        entropy.mean,
        entropy.se,
        bound,
        verdict,
    )
    return EntropyReport(
        entropy=entropy,
        half_energy=Estimate.from_samples(samples.quadratic_variation),
        bound=bound,
        margin=margin,
        verdict=verdict,
    )


def density_moment(
    samples: DensitySamples, p: float, bound: float
) -> DensityMomentReport:
    """``E R^{p/(p-1)}`` against ``exp(p B/(p-1)^2)``, compared in logs."""
    exponent = p / (p - 1.0)
    moment = Estimate.from_samples(samples.terminal_density**exponent)
    log_bound = p * bound / (p - 1.0) ** 2
    se_log = moment.se / moment.mean if moment.mean > 0.0 else 0.0
    return DensityMomentReport(
        p=p,
        moment=moment,
        log_bound=log_bound,
        verdict=decide(log_bound - math.log(moment.mean), se_log),
    )


def martingale_check(samples: DensitySamples) -> MartingaleReport:
    """Unit mean of ``R`` at every probe time and strict positivity."""
    density = np.exp(samples.log_density)
    rows = []
    for j, t in enumerate(samples.probe_times):
        mean = Estimate.from_samples(density[:, j])
        rows.append(
            MartingaleRow(time=t, mean=mean, verdict=agree(mean.mean - 1.0, mean.se))
        )
    positive = bool(np.all(density > 0.0))
    verdict = combine([row.verdict for row in rows])
    if not positive:
        verdict = "fail"
    logger.info("Martingale check over %d probes: %s", len(rows), verdict)
    return MartingaleReport(rows=rows, positive=positive, verdict=verdict)
