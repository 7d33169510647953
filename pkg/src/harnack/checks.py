"""Monte Carlo checks of the Harnack inequalities and their mechanism.

Left and right sides always come from independent ensembles, seeded by
``seed.derive("lhs")`` and ``seed.derive("rhs")``, so correlation between
the two estimates can never hide a violation.
"""

import logging
import math

import numpy as np

from .._shared.ensemble import Estimate
from .._shared.errors import DomainError
from .._shared.rng import RngSeed
from .._shared.verdicts import SE_MULTIPLIER, agree, combine, decide
from ..coupling.schedule import make_schedule
from ..fraccalc.models import TimeGrid
from ..girsanov.constants import constants_bundle
from ..girsanov.density import density_moment, simulate_density
from ..sde.models import ModelSpec
from ..sde.solver import simulate_terminal
from .models import (
    ChangeOfMeasureReport,
    FellerReport,
    FellerRow,
    HarnackReport,
    TestFunction,
    check_floor,
)

logger = logging.getLogger(__name__)


def _point(x: np.ndarray | list[float]) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _bound(model: ModelSpec, theta0: float, x: np.ndarray, y: np.ndarray) -> float:
    return constants_bundle(model, theta0).headline.bound(x, y)


def _log_se(estimate: Estimate) -> float:
    """Delta-method standard error of ``log`` of a positive mean."""
    return estimate.se / estimate.mean


def estimate_pt(
    f: TestFunction,
    x: np.ndarray | list[float],
    model: ModelSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: RngSeed,
    *,
    jobs: int | None = None,
) -> Estimate:
    """``P_T f(x) = E f(X_T^x)`` with its standard error."""
    terminal = simulate_terminal(model, _point(x), grid, seed, n_paths, jobs=jobs)
    return Estimate.from_samples(f(terminal))


def log_harnack_check(
    f: TestFunction,
    x: np.ndarray | list[float],
    y: np.ndarray | list[float],
    model: ModelSpec,
    theta0: float,
    grid: TimeGrid,
    n_paths: int,
    seed: RngSeed,
    *,
    jobs: int | None = None,
) -> HarnackReport:
    """``P_T log f(y) <= log P_T f(x) + B(T, x, y)``.

    Raises:
        DomainError: If the floor of ``f`` is not positive.
    """
    check_floor(f)
    x, y = _point(x), _point(y)
    bound = _bound(model, theta0, x, y)
    lhs_seed, rhs_seed = seed.derive("lhs"), seed.derive("rhs")

    lhs_terminal = simulate_terminal(model, y, grid, lhs_seed, n_paths, jobs=jobs)
    lhs = Estimate.from_samples(f.log(lhs_terminal))
    rhs = estimate_pt(f, x, model, grid, n_paths, rhs_seed, jobs=jobs)

    log_rhs = math.log(rhs.mean) + bound
    margin = log_rhs - lhs.mean
    margin_se = math.hypot(lhs.se, _log_se(rhs))
    report = HarnackReport(
        check="log-harnack",
        lhs=lhs,
        rhs=rhs,
        bound=bound,
        log_lhs=lhs.mean,
        log_rhs=log_rhs,
        margin=margin,
        margin_se=margin_se,
        verdict=decide(margin, margin_se),
        n_paths=n_paths,
        seeds={"lhs": lhs_seed.master, "rhs": rhs_seed.master},
    )
    logger.info(
        "Log-Harnack margin %.4g +- %.2g: %s", margin, margin_se, report.verdict
    )
    return report


def power_harnack_check(
    p: float,
    f: TestFunction,
    x: np.ndarray | list[float],
    y: np.ndarray | list[float],
    model: ModelSpec,
    theta0: float,
    grid: TimeGrid,
    n_paths: int,
    seed: RngSeed,
    *,
    density_paths: int | None = None,
    jobs: int | None = None,
) -> HarnackReport:
    """``(P_T f)^p(y) <= P_T f^p(x) exp(p B(T, x, y)/(p - 1))``, compared in logs.

    Args:
        p: Exponent, strictly greater than 1.
        f: Positive bounded test function.
        x: Start of the right side.
        y: Start of the left side.
        model: Validated model.
        theta0: Coupling parameter in ``(0, 2)``.
        grid: Solver grid ending at ``model.T``.
        n_paths: Paths per side.
        seed: Master seed; sides and the density moment use derived seeds.
        density_paths: Coupled paths for the density moment
            ``E R^{p/(p-1)}``; defaults to ``n_paths``, 0 skips it.
        jobs: Worker threads.

    Raises:
        DomainError: If ``p <= 1`` or the floor of ``f`` is not positive.
    """
    if not p > 1.0:
        raise DomainError(f"p must exceed 1, got {p}")
    check_floor(f)
    x, y = _point(x), _point(y)
    bound = _bound(model, theta0, x, y)
    lhs_seed, rhs_seed = seed.derive("lhs"), seed.derive("rhs")

    lhs = estimate_pt(f, y, model, grid, n_paths, lhs_seed, jobs=jobs)
    rhs_terminal = simulate_terminal(model, x, grid, rhs_seed, n_paths, jobs=jobs)
    rhs = Estimate.from_samples(f(rhs_terminal) ** p)

    log_lhs = p * math.log(lhs.mean)
    log_rhs = math.log(rhs.mean) + p * bound / (p - 1.0)
    margin = log_rhs - log_lhs
    margin_se = math.hypot(p * _log_se(lhs), _log_se(rhs))
    seeds = {"lhs": lhs_seed.master, "rhs": rhs_seed.master}

    moment = None
    density_paths = n_paths if density_paths is None else density_paths
    if density_paths > 0:
        density_seed = seed.derive("density")
        schedule = make_schedule(model.K, theta0, model.T)
        samples = simulate_density(
            model, x, y, schedule, grid, density_seed, density_paths, jobs=jobs
        )
        moment = density_moment(samples, p, bound)
        seeds["density"] = density_seed.master

    report = HarnackReport(
        check="power-harnack",
        p=p,
        lhs=lhs,
        rhs=rhs,
        bound=bound,
        log_lhs=log_lhs,
        log_rhs=log_rhs,
        margin=margin,
        margin_se=margin_se,
        verdict=decide(margin, margin_se),
        n_paths=n_paths,
        seeds=seeds,
        density_moment=moment,
    )
    logger.info(
        "Power-Harnack (p=%g) margin %.4g +- %.2g: %s",
        p,
        margin,
        margin_se,
        report.verdict,
    )
    return report


def change_of_measure_check(
    f: TestFunction,
    x: np.ndarray | list[float],
    y: np.ndarray | list[float],
    model: ModelSpec,
    theta0: float,
    grid: TimeGrid,
    n_paths: int,
    seed: RngSeed,
    *,
    jobs: int | None = None,
) -> ChangeOfMeasureReport:
    """``E[R f(X_T^x)] = P_T f(y)`` and ``E R = 1``, both within 3 combined SE.

    The weighted side reuses the coupled ensemble, where ``X_T = Y_T``; the
    plain side is an independent ensemble started at ``y``.
    """
    x, y = _point(x), _point(y)
    coupled_seed, plain_seed = seed.derive("coupled"), seed.derive("plain")
    schedule = make_schedule(model.K, theta0, model.T)
    samples = simulate_density(
        model, x, y, schedule, grid, coupled_seed, n_paths, jobs=jobs
    )
    density = samples.terminal_density
    weighted = Estimate.from_samples(density * f(samples.x_terminal))
    plain = estimate_pt(f, y, model, grid, n_paths, plain_seed, jobs=jobs)
    density_mean = Estimate.from_samples(density)

    difference = weighted.mean - plain.mean
    combined_se = math.hypot(weighted.se, plain.se)
    verdict = combine(
        [
            agree(difference, combined_se),
            agree(density_mean.mean - 1.0, density_mean.se),
        ]
    )
    logger.info(
        "Change of measure: E[R f] - P_T f(y) = %.3g +- %.2g, E R = %.4g: %s",
        difference,
        combined_se,
        density_mean.mean,
        verdict,
    )
    return ChangeOfMeasureReport(
        weighted=weighted,
        plain=plain,
        difference=difference,
        combined_se=combined_se,
        density_mean=density_mean,
        verdict=verdict,
        n_paths=n_paths,
        seeds={"coupled": coupled_seed.master, "plain": plain_seed.master},
    )


def _directions(d: int) -> np.ndarray:
    eye = np.eye(d)
    return np.vstack([eye, -eye])


def feller_diagnostic(
    f: TestFunction,
    x: np.ndarray | list[float],
    radii: list[float],
    model: ModelSpec,
    theta0: float,
    grid: TimeGrid,
    n_paths: int,
    seed: RngSeed,
    *,
    jobs: int | None = None,
) -> FellerReport:
    """``sup_{|y-x| = rho} |P_T f(y) - P_T f(x)|`` on common random numbers.

    Probe directions are the signed coordinate axes. Every start shares the
    seed of ``x``, so the paired differences vanish at ``rho = 0``.
    """
    x = _point(x)
    base = f(simulate_terminal(model, x, grid, seed, n_paths, jobs=jobs))
    rows = []
    for radius in sorted(radii):
        best, best_se = 0.0, 0.0
        for direction in _directions(model.d):
            y = x + radius * direction
            moved = f(simulate_terminal(model, y, grid, seed, n_paths, jobs=jobs))
            paired = Estimate.from_samples(moved - base)
            if abs(paired.mean) > best:
                best, best_se = abs(paired.mean), paired.se
        bound = _bound(model, theta0, x, x + radius * _directions(model.d)[0])
        rows.append(
            FellerRow(
                radius=radius,
                max_difference=best,
                se=best_se,
                bound=bound,
                modulus=f.sup_norm * math.sqrt(2.0 * bound),
            )
        )
    monotone = all(
        later.max_difference
        >= earlier.max_difference - SE_MULTIPLIER * math.hypot(earlier.se, later.se)
        for earlier, later in zip(rows, rows[1:], strict=False)
    )
    logger.info("Feller diagnostic over %d radii: monotone=%s", len(rows), monotone)
    return FellerReport(rows=rows, monotone=monotone, n_paths=n_paths, seed=seed.master)
