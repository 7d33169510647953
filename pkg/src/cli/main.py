"""Command-line entry point.

Every command reads an :class:`ExperimentConfig` JSON document, prints one
:class:`RunReport` as JSON on stdout and, with an output directory, writes
the report, CSV artifacts and a ``timing.json`` sidecar there. Logs go to
stderr.
"""

import argparse
import json
import logging
import math
import sys
import time
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from .. import __version__
from .._shared.ensemble import Estimate, resolve_jobs
from .._shared.errors import FhlError, InvalidInputError, UnsupportedParameterError
from .._shared.verdicts import Verdict, agree, combine, decide
from ..coupling.diagnostics import (
    coupling_report,
    coupling_time_estimate,
    energy_check,
    write_trace_csv,
)
from ..coupling.schedule import make_schedule
from ..coupling.solver import batch_trace, solve_coupled, solve_coupled_batch
from ..ergodic.chain import chain_states, pool_states, tightness_report
from ..ergodic.checks import (
    entropy_cost_check,
    invariance_check,
    invariant_variance,
    linear_rate,
)
from ..ergodic.models import ChainConfig
from ..ergodic.transport import write_measure_csv
from ..fbm.diagnostics import holder_norm, write_csv
from ..fbm.sampling import sample_direct_batch, sample_volterra, sample_volterra_batch
from ..girsanov.constants import constants_bundle
from ..girsanov.density import (
    entropy_diagnostic,
    log_density,
    martingale_check,
    shift_kh_inverse,
    simulate_density,
)
from ..harnack.checks import (
    change_of_measure_check,
    feller_diagnostic,
    log_harnack_check,
    power_harnack_check,
)
from .models import (
    ALL_CHECKS,
    EXIT_ERROR,
    EXIT_OK,
    EXIT_USAGE,
    CheckName,
    CheckResult,
    ExperimentConfig,
    RunReport,
)

logger = logging.getLogger(__name__)


class Timings:
    """Wall-clock seconds per span, kept out of the report body."""

    def __init__(self) -> None:
        self.seconds: dict[str, float] = {}

    @contextmanager
    def span(self, name: str, **attributes: object) -> Iterator[None]:
        start = time.perf_counter()
        with logfire.span("{label}", label=name, **attributes):
            yield
        self.seconds[name] = time.perf_counter() - start


class Context(BaseModel):
    """What a command needs besides the config."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ExperimentConfig
    out: Path | None
    jobs: int
    timings: Timings

    @property
    def csv_enabled(self) -> bool:
        return self.out is not None and self.config.output.csv


def _result(
    name: str,
    report: BaseModel | None,
    verdict: Verdict | None = None,
    note: str | None = None,
) -> CheckResult:
    body = None if report is None else report.model_dump(mode="json")
    return CheckResult(name=name, verdict=verdict, report=body, note=note)


def _new_report(command: str, ctx: Context) -> RunReport:
    return RunReport(
        command=command,
        version=__version__,
        seed=ctx.config.run.seed,
        model=ctx.config.model,
    )


def cmd_constants(ctx: Context) -> RunReport:
    """Both bundle variants, term by term, and the bound at ``(x, y)``."""
    cfg = ctx.config
    report = _new_report("constants", ctx)
    report.bundle = constants_bundle(cfg.model, cfg.coupling.theta0)
    x, y = np.asarray(cfg.run.x), np.asarray(cfg.run.y)
    gap = x - y
    report.checks.append(
        CheckResult(
            name="bound",
            verdict=None,
            report={
                "distance_sq": float(gap @ gap),
                "printed": report.bundle.headline.printed_bound(float(gap @ gap)),
                "bound": report.bundle.headline.bound(x, y),
            },
        )
    )
    return report


def _energy(ctx: Context, name: str) -> CheckResult:
    cfg = ctx.config
    model, grid, run = cfg.model, cfg.grid, cfg.run
    schedule = make_schedule(model.K, cfg.coupling.theta0, model.T)
    noise = sample_volterra_batch(
        grid,
        model.H,
        model.d,
        run.rng.derive(name),
        run.energy_traces,
        jobs=ctx.jobs,
    )
    x, y = np.asarray(run.x), np.asarray(run.y)
    batch = solve_coupled_batch(model, x, y, noise, schedule)
    energies, couplings = [], []
    for i in range(run.energy_traces):
        trace = batch_trace(batch, i, noise.path(i))
        energies.append(energy_check(trace))
        couplings.append(coupling_report(trace))
        if i == 0 and ctx.csv_enabled:
            write_trace_csv(trace, ctx.out / "coupling-trace.csv")
    passed = all(e.passed for e in energies) and all(c.success for c in couplings)
    return CheckResult(
        name=name,
        verdict="pass" if passed else "fail",
        report={
            "traces": run.energy_traces,
            "max_excess": max(e.max_excess for e in energies),
            "violations": sum(e.violations for e in energies),
            "max_terminal_gap": max(c.terminal_gap for c in couplings),
            "coupled": sum(c.success for c in couplings),
            "budget": energies[0].budget,
        },
    )


def _feller(ctx: Context, name: str) -> CheckResult:
    cfg = ctx.config
    run = cfg.run
    report = feller_diagnostic(
        run.test_function,
        run.x,
        run.radii,
        cfg.model,
        cfg.coupling.theta0,
        cfg.grid,
        run.n_paths,
        run.rng.derive(name),
        jobs=ctx.jobs,
    )
    # Pinsker: |P_T f(y) - P_T f(x)| <= ||f|| sqrt(2 B)
    verdict = combine(
        [decide(row.modulus - row.max_difference, row.se) for row in report.rows]
    )
    return _result(name, report, verdict)


def _run_check(ctx: Context, name: CheckName) -> list[CheckResult]:
    cfg = ctx.config
    model, grid, run, theta0 = cfg.model, cfg.grid, cfg.run, cfg.coupling.theta0
    x, y = np.asarray(run.x), np.asarray(run.y)
    f, seed = run.test_function, run.rng.derive(name)
    schedule = make_schedule(model.K, theta0, model.T)
    match name:
        case "energy":
            return [_energy(ctx, name)]
        case "martingale":
            samples = simulate_density(
                model, x, y, schedule, grid, seed, run.n_paths, jobs=ctx.jobs
            )
            report = martingale_check(samples)
            return [_result(name, report, report.verdict)]
        case "entropy":
            report = entropy_diagnostic(
                model, x, y, schedule, grid, run.n_paths, seed, jobs=ctx.jobs
            )
            return [_result(name, report, report.verdict)]
        case "log-harnack":
            report = log_harnack_check(
                f, x, y, model, theta0, grid, run.n_paths, seed, jobs=ctx.jobs
            )
            return [_result(name, report, report.verdict)]
        case "power-harnack":
            results = []
            for p in run.p:
                report = power_harnack_check(
                    p,
                    f,
                    x,
                    y,
                    model,
                    theta0,
                    grid,
                    run.n_paths,
                    seed.derive(f"p={p!r}"),
                    jobs=ctx.jobs,
                )
                results.append(_result(f"{name} p={p:g}", report, report.verdict))
            return results
        case "change-of-measure":
            report = change_of_measure_check(
                f, x, y, model, theta0, grid, run.n_paths, seed, jobs=ctx.jobs
            )
            return [_result(name, report, report.verdict)]
        case "feller":
            return [_feller(ctx, name)]


def cmd_verify(ctx: Context) -> RunReport:
    """Run the selected checks in a fixed order, whatever the config lists."""
    report = _new_report("verify", ctx)
    cfg = ctx.config
    report.bundle = constants_bundle(cfg.model, cfg.coupling.theta0)
    selected = [name for name in ALL_CHECKS if name in cfg.run.checks]
    for name in selected:
        with ctx.timings.span(f"verify {name}", check=name, seed=cfg.run.seed):
            report.checks.extend(_run_check(ctx, name))
    if ctx.csv_enabled and "energy" in selected:
        report.artifacts.append("coupling-trace.csv")
    return report


def _tightness(ctx: Context, states: np.ndarray) -> CheckResult:
    model = ctx.config.model
    contraction = moment_scale = None
    try:
        lam = linear_rate(model)
    except UnsupportedParameterError:
        pass
    else:
        contraction = math.exp(-2.0 * lam * model.T)
        moment_scale = invariant_variance(model) * (1.0 - contraction)
    report = tightness_report(
        states,
        ctx.config.invariant.radii,
        contraction=contraction,
        moment_scale=moment_scale,
    )
    if report.moment_bound is None:
        return _result("tightness", report, note="no closed-form moment bound")
    worst = int(np.argmax(report.cesaro_moments))
    margin = report.moment_bound - report.cesaro_moments[worst]
    return _result("tightness", report, decide(margin, report.step_moments[worst].se))


def cmd_invariant(ctx: Context) -> RunReport:
    """Krylov-Bogoliubov measure, its invariance and the entropy-cost check."""
    cfg = ctx.config
    block = cfg.invariant
    if block is None:
        raise InvalidInputError("The invariant command needs an 'invariant' block")
    model, grid, seed = cfg.model, cfg.grid, cfg.run.rng
    report = _new_report("invariant", ctx)

    chain = ChainConfig(
        x0=block.x0,
        n_steps=block.n_steps,
        n_chains=block.n_chains,
        seed=seed.derive("chain"),
    )
    with ctx.timings.span("invariant chain", seed=cfg.run.seed):
        states = chain_states(chain, model, grid, jobs=ctx.jobs)
    mu = pool_states(states)
    if ctx.csv_enabled:
        write_measure_csv(mu, ctx.out / "measure.csv")
        report.artifacts.append("measure.csv")
    report.checks.append(_tightness(ctx, states))

    if block.n_steps == 1:
        report.checks.append(
            CheckResult(
                name="invariance",
                verdict=None,
                note="one step only: the measure is emitted without a verdict",
            )
        )
    else:
        with ctx.timings.span("invariant invariance", seed=cfg.run.seed):
            inv = invariance_check(
                mu, model, grid, seed.derive("invariance"), jobs=ctx.jobs
            )
        verdict = "pass" if inv.within_floor else "inconclusive"
        report.checks.append(_result("invariance", inv, verdict))

    with ctx.timings.span("invariant entropy-cost", seed=cfg.run.seed):
        report.checks.extend(_entropy_cost(ctx))
    return report


def _entropy_cost(ctx: Context) -> list[CheckResult]:
    cfg = ctx.config
    results = []
    for tilt in cfg.invariant.tilts:
        try:
            report = entropy_cost_check(
                cfg.model,
                tilt,
                cfg.coupling.theta0,
                cfg.run.rng.derive(f"entropy-cost m={tilt!r}"),
                cfg.invariant.entropy_samples,
            )
        except UnsupportedParameterError as e:
            return [CheckResult(name="entropy-cost", verdict=None, note=str(e))]
        verdict = combine([report.verdict, report.importance_verdict])
        results.append(_result(f"entropy-cost m={tilt:g}", report, verdict))
    return results


def cmd_sample(ctx: Context) -> RunReport:
    """fBm ensemble by the configured route; ``E B_T^2`` against ``T^{2H}``."""
    cfg = ctx.config
    model, grid, run = cfg.model, cfg.grid, cfg.run
    sampler = sample_direct_batch if run.route == "direct" else sample_volterra_batch
    ensemble = sampler(
        grid, model.H, model.d, run.rng.derive("sample"), run.n_paths, jobs=ctx.jobs
    )
    report = _new_report("sample", ctx)

    terminal = Estimate.from_samples(ensemble.values[:, -1, 0] ** 2)
    expected = model.T ** (2.0 * model.H)
    report.checks.append(
        CheckResult(
            name=f"terminal-variance {run.route}",
            verdict=agree(terminal.mean - expected, terminal.se),
            report={
                "estimate": terminal.model_dump(),
                "expected": expected,
                "holder": holder_norm(ensemble.path(0), model.H - 0.1),
            },
        )
    )
    if ctx.csv_enabled:
        for i in range(min(cfg.output.csv_paths, run.n_paths)):
            write_csv(ensemble.path(i), ctx.out / f"fbm-{i}.csv")
            report.artifacts.append(f"fbm-{i}.csv")
    return report


def cmd_couple(ctx: Context) -> RunReport:
    """One coupled trace with its energy, gap and Girsanov density."""
    cfg = ctx.config
    model, grid, run = cfg.model, cfg.grid, cfg.run
    schedule = make_schedule(model.K, cfg.coupling.theta0, model.T)
    noise = sample_volterra(grid, model.H, model.d, run.rng.derive("couple"))
    trace = solve_coupled(model, np.asarray(run.x), np.asarray(run.y), noise, schedule)
    report = _new_report("couple", ctx)

    energy = energy_check(trace)
    coupling = coupling_report(trace)
    density = log_density(trace, shift_kh_inverse(trace))
    report.checks.extend(
        [
            _result("energy", energy, "pass" if energy.passed else "fail"),
            _result("coupling", coupling, "pass" if coupling.success else "fail"),
            _result("coupling-time", coupling_time_estimate(trace)),
            CheckResult(
                name="density",
                verdict=None,
                report={
                    "log_density": float(density.log_density[-1]),
                    "quadratic_variation": float(density.quadratic_variation[-1]),
                },
            ),
        ]
    )
    if ctx.csv_enabled:
        write_trace_csv(trace, ctx.out / "coupling-trace.csv")
        report.artifacts.append("coupling-trace.csv")
    return report


COMMANDS: dict[str, Callable[[Context], RunReport]] = {
    "constants": cmd_constants,
    "verify": cmd_verify,
    "invariant": cmd_invariant,
    "sample": cmd_sample,
    "couple": cmd_couple,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True)
    common.add_argument("--out", type=Path, help="Directory for report and CSVs")
    common.add_argument("--seed", type=int, help="Overrides run.seed")
    common.add_argument("--jobs", type=int, help="Worker threads (default FHL_JOBS)")

    parser = argparse.ArgumentParser(
        prog="fbm-harnack",
        description="Coupling, Girsanov and Harnack numerics for fBm-driven SDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=command.__doc__)
    sub.add_parser("schema", help="Print the JSON schema of the config")
    return parser


def load_config(path: Path, seed: int | None = None) -> ExperimentConfig:
    config = ExperimentConfig.model_validate_json(path.read_text())
    if seed is not None:
        run = config.run.model_copy(update={"seed": seed})
        config = config.model_copy(update={"run": run})
    return config


def _write_outputs(out: Path, report: RunReport, body: str, timings: Timings) -> None:
    (out / "report.json").write_text(body + "\n")
    timing = {"command": report.command, "seconds": timings.seconds}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    logger.info("Wrote report and timings to %s", out)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    logfire.configure(
        service_name="fbm-harnack", send_to_logfire="if-token-present", console=False
    )

    if args.command == "schema":
        print(json.dumps(ExperimentConfig.model_json_schema(), indent=2))
        return EXIT_OK

    try:
        config = load_config(args.config, args.seed)
    except ValidationError as e:
        logger.error("Invalid config %s:\n%s", args.config, e)
        return EXIT_USAGE
    except OSError as e:
        logger.error("Cannot read config: %s", e)
        return EXIT_USAGE
    if args.command == "invariant" and config.invariant is None:
        logger.error("The invariant command needs an 'invariant' block")
        return EXIT_USAGE

    out = args.out or config.output.dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx = Context(
        config=config, out=out, jobs=resolve_jobs(args.jobs), timings=Timings()
    )
    try:
        with ctx.timings.span(args.command, seed=config.run.seed):
            report = COMMANDS[args.command](ctx)
    except FhlError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    except Exception:
        logger.exception("Command %s failed", args.command)
        return EXIT_ERROR

    body = report.model_dump_json(indent=2)
    print(body)
    if out is not None:
        _write_outputs(out, report, body, ctx.timings)
    logger.info("%s finished: %s", args.command, report.verdict)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
