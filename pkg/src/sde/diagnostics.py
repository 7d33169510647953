import numpy as np

from ..fbm.models import FbmPath
from ..fraccalc.models import FracOrder, SampledFunction, as_order
from ..fraccalc.operators import zahle_integral
from .models import ModelSpec, YoungEnergyReport
from .solver import solve


def young_energy_identity(
    model: ModelSpec,
    x0: np.ndarray,
    noise: FbmPath,
    alpha: FracOrder | float = 0.5,
) -> YoungEnergyReport:
    """Pathwise chain rule for ``|X|^2`` along one Euler path.

    The noise integral is a Young integral; the fractional pairing needs
    ``1 - H < alpha < H`` to converge on rough paths.
    """
    path = solve(model, x0, noise)
    grid = noise.grid
    t = grid.nodes
    states = path.states

    drift = np.stack(
        [model.drift_at(s, x[None])[0] for s, x in zip(t, states, strict=True)]
    )
    drift_term = 2.0 * float(np.trapezoid(np.einsum("kd,kd->k", states, drift), t))
    weighted = SampledFunction(grid=grid, values=model.sigma_diag(t) * states)
    driver = SampledFunction(grid=grid, values=noise.values)
    pairing = 2.0 * zahle_integral(weighted, driver, as_order(alpha))
    riemann = 2.0 * float(np.sum(weighted.values[:-1] * noise.increments))

    start = np.asarray(x0, dtype=float)
    lhs = float(path.terminal @ path.terminal)
    base = float(start @ start) + drift_term
    return YoungEnergyReport(
        lhs=lhs,
        drift_term=drift_term,
        noise_term_pairing=pairing,
        noise_term_riemann=riemann,
        residual_pairing=lhs - base - pairing,
        residual_riemann=lhs - base - riemann,
    )
