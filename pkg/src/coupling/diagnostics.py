import logging
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .models import CouplingReport, CouplingTime, CouplingTrace, EnergyReport

logger = logging.getLogger(__name__)


def _retained(trace: CouplingTrace) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times, squared gaps and ``zeta`` at the nodes before ``T``."""
    stop = trace.terminal_index + 1
    t = trace.grid.nodes[:stop]
    squared = np.sum(trace.diff_path[:stop] ** 2, axis=1)
    return t, squared, trace.schedule.zeta(t)


def _budget(trace: CouplingTrace, zeta0: float) -> float:
    start = trace.start_gap
    return float(start @ start) / (trace.schedule.theta0 * zeta0**3)


def energy_check(trace: CouplingTrace, slack: float = 0.05) -> EnergyReport:
    """Running energy against its initial budget at every retained node."""
    t, squared, zeta = _retained(trace)
    theta0 = trace.schedule.theta0
    running = cumulative_trapezoid(squared / zeta**4, t, initial=0.0)
    energy = running + squared / (theta0 * zeta**3)
    budget = _budget(trace, float(zeta[0]))

    if budget == 0.0:
        excess = np.where(energy > 0.0, np.inf, 0.0)
    else:
        excess = energy / budget - 1.0
    max_excess = max(0.0, float(np.max(excess)))
    return EnergyReport(
        budget=budget,
        max_excess=max_excess,
        violations=int(np.sum(excess > slack)),
        slack=slack,
        passed=max_excess <= slack,
    )


def coupling_report(
    trace: CouplingTrace, tol: float = 1e-2, slack: float = 0.05
) -> CouplingReport:
    """Gap at the last node before ``T`` and the normalized gap trajectory."""
    t, squared, zeta = _retained(trace)
    normalized = squared / (trace.schedule.theta0 * zeta**3)
    budget = _budget(trace, float(zeta[0]))
    terminal_gap = float(np.sqrt(squared[-1]))
    start_gap = float(np.linalg.norm(trace.start_gap))
    success = bool(
        np.all(normalized <= budget * (1.0 + slack))
        and terminal_gap <= tol * start_gap
    )
    logger.info(
        "Coupling gap %.3g at t=%.6g (start %.3g): %s",
        terminal_gap,
        t[-1],
        start_gap,
        "coupled" if success else "not coupled",
    )
    return CouplingReport(
        terminal_gap=terminal_gap,
        terminal_time=float(t[-1]),
        budget=budget,
        normalized_gap=normalized.tolist(),
        success=success,
    )


def coupling_time_estimate(trace: CouplingTrace, tol: float = 1e-2) -> CouplingTime:
    """First hit of the relative gap tolerance and ``int |X-Y|^2/zeta^4``.

    A finite weighted energy is what forces the gap to close at ``T``.
    """
    t, squared, zeta = _retained(trace)
    start_gap = float(np.linalg.norm(trace.start_gap))
    hits = np.flatnonzero(np.sqrt(squared) <= tol * start_gap)
    weighted = float(np.trapezoid(squared / zeta**4, t))
    if hits.size == 0:
        return CouplingTime(index=None, time=None, weighted_energy=weighted)
    first = int(hits[0])
    return CouplingTime(index=first, time=float(t[first]), weighted_energy=weighted)


def write_trace_csv(trace: CouplingTrace, target: Path) -> Path:
    """Write ``t, x.., y.., gap, zeta, u..``; ``u`` is 0 on the node at ``T``."""
    d = trace.x_path.states.shape[1]
    header = ",".join(
        [
            "t",
            *(f"x{i + 1}" for i in range(d)),
            *(f"y{i + 1}" for i in range(d)),
            "gap",
            "zeta",
            *(f"u{i + 1}" for i in range(d)),
        ]
    )
    rows = np.column_stack(
        [
            trace.grid.nodes,
            trace.x_path.states,
            trace.y_path.states,
            np.linalg.norm(trace.diff_path, axis=1),
            trace.schedule.zeta(trace.grid.nodes),
            trace.u_path,
        ]
    )
    np.savetxt(target, rows, delimiter=",", header=header, comments="")
    logger.info("Wrote coupled trace with %d nodes to %s", trace.grid.size, target)
    return target
