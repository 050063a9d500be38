"""Experiment configuration: pydantic models loaded from YAML."""

import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from mide_lab import solver
from mide_lab.errors import ConfigError, InvalidInputError
from mide_lab.expressions import CoordinateExpression, DensityExpression, JumpExpression, coefficient
from mide_lab.grid import Geometry
from mide_lab.levy import (
    JumpFunction,
    LevyKernel,
    custom_kernel,
    embedded_kernel,
    fractional_kernel,
    identity_jump,
    modulated_kernel,
    scaled_jump,
)

BlockName = Literal[1, 2, "full"]
Scalar = float | str


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FractionalKernelConfig(_Strict):
    kind: Literal["fractional"] = "fractional"
    dim: int = Field(1, ge=1, le=3)
    beta: float = Field(gt=0.0, lt=2.0)
    normalization: float = Field(1.0, gt=0.0)

    def build(self) -> LevyKernel:
        return fractional_kernel(self.dim, self.beta, self.normalization)


class ModulatedKernelConfig(_Strict):
    """c(x)·|z|^(-d-β) with c given as an expression in x1..xd."""

    kind: Literal["modulated"]
    dim: int = Field(1, ge=1, le=3)
    beta: float = Field(gt=0.0, lt=2.0)
    coefficient: str
    gamma: float = Field(1.0, gt=0.0, le=1.0)

    def build(self) -> LevyKernel:
        base = fractional_kernel(self.dim, self.beta)
        return modulated_kernel(base, CoordinateExpression(self.coefficient, self.dim), self.gamma)


class EmbeddedKernelConfig(_Strict):
    kind: Literal["embedded"]
    base: FractionalKernelConfig
    ambient_dim: int = Field(ge=2, le=3)
    support: list[int]

    def build(self) -> LevyKernel:
        return embedded_kernel(self.base.build(), self.ambient_dim, tuple(self.support))


class CustomKernelConfig(_Strict):
    """Density in x1..xd, z1..zd and r = |z|."""

    kind: Literal["custom"]
    dim: int = Field(1, ge=1, le=3)
    beta: float = Field(gt=0.0, lt=2.0)
    density: str
    x_dependent: bool = False
    holder_gamma: float | None = Field(None, gt=0.0, le=1.0)

    def build(self) -> LevyKernel:
        return custom_kernel(
            self.dim,
            DensityExpression(self.density, self.dim),
            self.beta,
            x_dependent=self.x_dependent,
            holder_gamma=self.holder_gamma,
        )


KernelConfig = Annotated[
    FractionalKernelConfig | ModulatedKernelConfig | EmbeddedKernelConfig | CustomKernelConfig,
    Field(discriminator="kind"),
]


class IdentityJumpConfig(_Strict):
    kind: Literal["identity"]
    dim: int = Field(1, ge=1, le=3)

    def build(self) -> JumpFunction:
        return identity_jump(self.dim)


class _JumpConstants(_Strict):
    c0: float = Field(gt=0.0)
    C0: float = Field(gt=0.0)
    gamma: float = Field(gt=0.0, le=1.0)
    tail_lipschitz: float = Field(0.0, ge=0.0)


class ScaledJumpConfig(_JumpConstants):
    """j(x, z) = s(x)·z."""

    kind: Literal["scaled"]
    dim: int = Field(1, ge=1, le=3)
    scale: str

    def build(self) -> JumpFunction:
        scale = CoordinateExpression(self.scale, self.dim)
        return scaled_jump(
            self.dim, lambda x: float(scale(x)), self.c0, self.C0, self.gamma, self.tail_lipschitz
        )


class MapJumpConfig(_JumpConstants):
    kind: Literal["map"]
    components: list[str] = Field(min_length=1, max_length=3)

    def build(self) -> JumpFunction:
        jump = JumpExpression(tuple(self.components))
        return JumpFunction(
            jump.dim, jump, self.c0, self.C0, self.gamma, self.tail_lipschitz, name="map"
        )


JumpConfig = Annotated[
    IdentityJumpConfig | ScaledJumpConfig | MapJumpConfig, Field(discriminator="kind")
]


class LocalTraceConfig(_Strict):
    type: Literal["local-trace"]
    coefficient: Scalar = 1.0
    block: BlockName = "full"
    matrix: list[list[float]] | None = None

    def build(self, d: int) -> solver.LocalTrace:
        matrix = None if self.matrix is None else np.asarray(self.matrix, dtype=float)
        return solver.LocalTrace(coefficient(self.coefficient, d), self.block, matrix)


class NonlocalConfig(_Strict):
    type: Literal["nonlocal"]
    kernel: KernelConfig
    coefficient: Scalar = 1.0
    block: BlockName = "full"
    sign: Literal[1, -1] = 1
    jump: JumpConfig | None = None
    force_quadrature: bool = False
    delta: float = Field(0.5, gt=0.0, le=1.0)

    def build(self, d: int) -> solver.Nonlocal:
        return solver.Nonlocal(
            self.kernel.build(),
            coefficient(self.coefficient, d),
            self.block,
            float(self.sign),
            None if self.jump is None else self.jump.build(),
            self.force_quadrature,
            self.delta,
        )


class GradientPowerConfig(_Strict):
    type: Literal["gradient-power"]
    coefficient: Scalar = 1.0
    exponent: float = Field(1.0, ge=0.0)
    block: BlockName = "full"
    cutoff: float = Field(float("inf"), ge=0.0)

    def build(self, d: int) -> solver.GradientPower:
        return solver.GradientPower(coefficient(self.coefficient, d), self.exponent, self.block, self.cutoff)


class DriftConfig(_Strict):
    type: Literal["drift"]
    velocity: list[Scalar] = Field(min_length=1)
    block: BlockName = "full"

    def build(self, d: int) -> solver.Drift:
        return solver.Drift(tuple(coefficient(b, d) for b in self.velocity), self.block)


class ZerothOrderConfig(_Strict):
    type: Literal["zeroth-order"]
    c: float

    def build(self, d: int) -> solver.ZerothOrder:
        return solver.ZerothOrder(self.c)


TermConfig = Annotated[
    LocalTraceConfig | NonlocalConfig | GradientPowerConfig | DriftConfig | ZerothOrderConfig,
    Field(discriminator="type"),
]


class ControlConfig(_Strict):
    terms: list[TermConfig] = []
    forcing: Scalar = 0.0

    def build(self, d: int) -> solver.ControlVariant:
        return solver.ControlVariant(tuple(t.build(d) for t in self.terms), coefficient(self.forcing, d))


class ProfileConfig(_Strict):
    Lambda1: Scalar = 1.0
    Lambda2: Scalar = 1.0
    Lambda0: float = Field(1.0, gt=0.0)
    k: float = Field(0.0, ge=0.0)
    tau: float = Field(1.0, gt=0.0, le=1.0)
    theta: float = Field(1.0, gt=0.0, le=1.0)
    theta_tilde: float = Field(1.0, gt=0.0, le=1.0)
    C1: float = Field(0.0, ge=0.0)
    C2: float = Field(0.0, ge=0.0)
    gamma_tilde: float = 0.0

    def build(self, d: int) -> solver.EllipticityProfile:
        values = self.model_dump()
        values["Lambda1"] = coefficient(self.Lambda1, d)
        values["Lambda2"] = coefficient(self.Lambda2, d)
        return solver.EllipticityProfile(**values)


class TermsEquationConfig(_Strict):
    """An equation assembled term by term."""

    form: Literal["terms"]
    name: str = "equation"
    d1: int = Field(ge=0)
    d2: int = Field(ge=0)
    n: int = Field(ge=8)
    terms: list[TermConfig]
    forcing: Scalar = 0.0
    controls: list[list[ControlConfig]] = []
    profile: ProfileConfig | None = None

    def build(self) -> solver.EquationSpec:
        d = self.d1 + self.d2
        return solver.EquationSpec(
            Geometry(self.d1, self.d2, self.n),
            tuple(t.build(d) for t in self.terms),
            coefficient(self.forcing, d),
            tuple(tuple(c.build(d) for c in row) for row in self.controls),
            None if self.profile is None else self.profile.build(d),
            self.name,
        )


CATALOGUE = {
    "toy-model": (solver.toy_model, 2),
    "model-equation": (solver.model_equation, None),
    "advection-fractional": (solver.advection_fractional, 1),
    "mixed-equation": (solver.mixed_equation, 2),
    "fractional-heat": (solver.fractional_heat, None),
    "isaacs-diffusion-control": (solver.isaacs_diffusion_control, None),
}
_COEFFICIENT_PARAMETERS = {"forcing", "drift", "a1", "a2", "b1", "b2", "b", "kernel_coefficient"}


class CatalogueEquationConfig(_Strict):
    """One of the named equations, with keyword overrides."""

    form: Literal["catalogue"]
    catalogue: Literal[
        "toy-model",
        "model-equation",
        "advection-fractional",
        "mixed-equation",
        "fractional-heat",
        "isaacs-diffusion-control",
    ]
    n: int = Field(ge=8)
    params: dict[str, float | str | list[float] | list[list[float]]] = {}

    def build(self) -> solver.EquationSpec:
        constructor, dim = CATALOGUE[self.catalogue]
        dim = dim or int(self.params.get("d", 1))
        kwargs: dict[str, Any] = {}
        for key, value in self.params.items():
            match key:
                case "d":
                    kwargs[key] = int(value)
                case "diffusions":
                    kwargs[key] = tuple(float(v) for v in value)
                case "matrix":
                    kwargs[key] = np.asarray(value, dtype=float)
                case _ if key in _COEFFICIENT_PARAMETERS:
                    kwargs[key] = coefficient(value, dim)
                case _:
                    kwargs[key] = value
        try:
            return constructor(self.n, **kwargs)
        except TypeError as error:
            raise ConfigError(f"{self.catalogue}: {error}") from error


EquationConfig = Annotated[
    TermsEquationConfig | CatalogueEquationConfig, Field(discriminator="form")
]


class _Experiment(_Strict):
    name: str = Field(min_length=1, pattern=r"^[a-z0-9]+(?:[-_][a-z0-9]+)*$")
    seed: int = Field(0, ge=0)
    jobs: int = Field(1, ge=1)
    tol_scale: float = Field(1.0, gt=0.0)
    out_dir: Path | None = None


class LemmasConfig(_Experiment):
    """Randomized checks of the matrix lemmas."""

    kind: Literal["lemmas"]
    block_triples: int = Field(1000, ge=1)
    convolutions: int = Field(500, ge=1)
    closed_forms: int = Field(200, ge=1)
    trace_pairs: int = Field(1000, ge=1)
    max_block_dim: int = Field(3, ge=1, le=8)


class EstimatesConfig(_Experiment):
    """Randomized instances of the nonlocal estimate inequalities."""

    kind: Literal["estimates"]
    instances: int = Field(200, ge=1)
    quadratic_instances: int = Field(100, ge=0)
    betas: list[float] = [0.5, 1.5]
    dims: list[Literal[1, 2]] = [1, 2]
    families: list[Literal["holder", "lipschitz-regularized"]] = ["holder", "lipschitz-regularized"]
    n: int = Field(16, ge=8, le=64)
    sign_cases: int = Field(20, ge=0)


class ConeCheckConfig(_Strict):
    eta: float = Field(gt=0.0, le=1.0)
    delta: float = Field(gt=0.0, le=1.0)
    beta: float = Field(gt=0.0, lt=2.0)


class ConditionSubject(_Strict):
    """A kernel, optionally with a jump map, and the conditions it should pass
    or fail (keys M1..M3, J1..J5)."""

    kernel: KernelConfig
    jump: JumpConfig | None = None
    expect: dict[str, bool] = {}


class ConditionsConfig(_Experiment):
    """Structural conditions of kernels and jump maps."""

    kind: Literal["conditions"]
    subjects: list[ConditionSubject] = Field(min_length=1)
    cone_checks: list[ConeCheckConfig] = []


class ModeCheck(_Strict):
    mode: list[int]
    value: float
    rtol: float = Field(0.02, gt=0.0)


class SolveConfig(_Experiment):
    kind: Literal["solve"]
    equation: EquationConfig
    tol: float = Field(1e-8, gt=0.0)
    max_steps: int = Field(100_000, ge=1)
    record_every: int = Field(100, ge=1)
    mode_check: ModeCheck | None = None
    refinement: list[int] = []
    check_comparison_bound: bool = False


class ParabolicConfig(_Experiment):
    kind: Literal["parabolic"]
    equation: EquationConfig
    u0: Scalar
    T: float = Field(gt=0.0)
    dt: float = Field(gt=0.0)
    snapshots: int = Field(10, ge=1)
    decay_check: ModeCheck | None = None
    certify_alpha: float | None = Field(None, gt=0.0, le=1.0)


class IsaacsConfig(_Experiment):
    kind: Literal["isaacs"]
    equation: EquationConfig
    tol: float = Field(1e-8, gt=0.0)
    max_steps: int = Field(100_000, ge=1)
    compare_fixed_controls: bool = True


class PredictionConfig(_Strict):
    kind: Literal["lipschitz", "holder", "from-structure"]
    alpha_max: float | None = Field(None, gt=0.0, le=1.0)
    beta: float | None = Field(None, gt=0.0, lt=2.0)
    k: float | None = Field(None, ge=0.0)

    @model_validator(mode="after")
    def _complete(self):
        if self.kind == "holder" and self.alpha_max is None:
            raise ValueError("a holder prediction needs alpha_max")
        if self.kind == "from-structure" and (self.beta is None or self.k is None):
            raise ValueError("a from-structure prediction needs beta and k")
        return self


class CertifyConfig(_Strict):
    family: Literal["holder", "lipschitz-regularized"] = "holder"
    alpha: float = Field(gt=0.0, le=1.0)
    rho: float | None = Field(None, gt=0.0)
    expression: str
    d: int = Field(1, ge=1, le=2)
    n: int = Field(ge=8)
    expected: float | None = None
    rtol: float = Field(0.02, gt=0.0)


class RegularityConfig(_Experiment):
    kind: Literal["regularity"]
    equation: EquationConfig | None = None
    prediction: PredictionConfig | None = None
    direction: BlockName = 1
    tol: float = Field(1e-6, gt=0.0)
    max_steps: int = Field(200_000, ge=1)
    certify: list[CertifyConfig] = []

    @model_validator(mode="after")
    def _paired(self):
        if (self.equation is None) != (self.prediction is None):
            raise ValueError("equation and prediction go together")
        if self.equation is None and not self.certify:
            raise ValueError("nothing to do: give an equation or certify entries")
        return self


ExperimentConfig = Annotated[
    LemmasConfig
    | EstimatesConfig
    | ConditionsConfig
    | SolveConfig
    | ParabolicConfig
    | IsaacsConfig
    | RegularityConfig,
    Field(discriminator="kind"),
]

EXPERIMENT_KINDS = ("lemmas", "estimates", "conditions", "solve", "parabolic", "isaacs", "regularity")


def parse_experiment(raw: Any) -> ExperimentConfig:
    try:
        return TypeAdapter(ExperimentConfig).validate_python(raw)
    except ValidationError as error:
        raise ConfigError(str(error)) from error


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Shim from YAML into Pydantic."""
    if not path.exists():
        raise ConfigError(f"Experiment config not found: {path}")

    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as error:
        raise ConfigError(f"{path}: {error}") from error
    if raw is None:
        raw = {}

    return parse_experiment(raw)


def build_equation(config: EquationConfig) -> solver.EquationSpec:
    """Build the runtime spec, reporting domain errors as config errors."""
    try:
        return config.build()
    except InvalidInputError as error:
        raise ConfigError(f"equation {getattr(config, 'name', config.form)}: {error}") from error


def config_hash(config: BaseModel) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
