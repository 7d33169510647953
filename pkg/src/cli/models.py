from pathlib import Path
from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .._shared.rng import RngSeed
from .._shared.verdicts import Verdict, combine
from ..fraccalc.models import TimeGrid
from ..girsanov.models import BundlePair
from ..harnack.models import ConstantFunction, TestFunction
from ..sde.models import ModelSpec

CheckName = Literal[
    "energy",
    "martingale",
    "entropy",
    "log-harnack",
    "power-harnack",
    "change-of-measure",
    "feller",
]

ALL_CHECKS: tuple[CheckName, ...] = (
    "energy",
    "martingale",
    "entropy",
    "log-harnack",
    "power-harnack",
    "change-of-measure",
    "feller",
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64


class _Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class CouplingBlock(_Block):
    theta0: float = Field(default=1.0, gt=0.0, lt=2.0)
    n: int = Field(default=256, ge=3, description="Uniform cells on [0, T]")
    refinement: int = Field(
        default=0, ge=0, description="Extra nodes halving towards T"
    )

    def grid(self, T: float) -> TimeGrid:
        return TimeGrid.uniform(T, self.n, self.refinement)


class RunBlock(_Block):
    n_paths: int = Field(default=2000, ge=2)
    seed: int = Field(default=0, ge=0)
    checks: list[CheckName] = Field(default_factory=lambda: list(ALL_CHECKS))
    x: list[float]
    y: list[float]
    test_function: TestFunction = ConstantFunction(value=1.0)
    p: list[float] = Field(default_factory=lambda: [2.0])
    radii: list[float] = Field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5])
    energy_traces: int = Field(default=16, ge=1)
    route: Literal["direct", "volterra"] = "volterra"

    @model_validator(mode="after")
    def check_exponents(self) -> Self:
        if any(not p > 1.0 for p in self.p):
            raise ValueError(f"Every power-Harnack exponent must exceed 1: {self.p}")
        if any(r < 0.0 for r in self.radii):
            raise ValueError("Feller radii must be non-negative")
        return self

    @property
    def rng(self) -> RngSeed:
        return RngSeed(master=self.seed)


class InvariantBlock(_Block):
    x0: list[float]
    n_steps: int = Field(default=20, ge=1)
    n_chains: int = Field(default=200, ge=1)
    tilts: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    radii: list[float] = Field(default_factory=lambda: [1.0, 4.0, 16.0])
    entropy_samples: int = Field(default=10_000, ge=2)


class OutputBlock(_Block):
    dir: Path | None = None
    csv: bool = True
    csv_paths: int = Field(default=1, ge=0, description="Sample paths written")


class ExperimentConfig(_Block):
    """One experiment: the model, the coupling and what to run on it."""

    model: ModelSpec
    coupling: CouplingBlock = CouplingBlock()
    run: RunBlock
    invariant: InvariantBlock | None = None
    output: OutputBlock = OutputBlock()

    @model_validator(mode="after")
    def check_dimensions(self) -> Self:
        d = self.model.d
        points = {"run.x": self.run.x, "run.y": self.run.y}
        if self.invariant is not None:
            points["invariant.x0"] = self.invariant.x0
        for name, point in points.items():
            if len(point) != d:
                raise ValueError(f"{name} must have {d} components, got {len(point)}")
        center = getattr(self.run.test_function, "center", None)
        weights = getattr(self.run.test_function, "weights", None)
        for name, vector in (("center", center), ("weights", weights)):
            if vector is not None and len(vector) != d:
                raise ValueError(f"Test function {name} must have {d} components")
        return self

    @property
    def grid(self) -> TimeGrid:
        return self.coupling.grid(self.model.T)


class CheckResult(BaseModel):
    """One named check; ``verdict`` is None for purely informational output."""

    name: str
    verdict: Verdict | None
    report: dict[str, Any] | None = None
    note: str | None = None


class RunReport(BaseModel):
    """Everything a command emits on stdout; wall-clock lives in ``timing.json``."""

    command: str
    version: str
    seed: int
    model: ModelSpec
    bundle: BundlePair | None = None
    checks: list[CheckResult] = []
    artifacts: list[str] = []

    @computed_field
    @property
    def verdict(self) -> Verdict:
        return combine([c.verdict for c in self.checks if c.verdict is not None])

    @property
    def exit_code(self) -> int:
        match self.verdict:
            case "fail":
                return EXIT_FAIL
            case "inconclusive":
                return EXIT_INCONCLUSIVE
            case _:
                return EXIT_OK
