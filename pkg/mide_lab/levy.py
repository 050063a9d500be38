"""Lévy kernels, jump maps, cone integrals and the structural condition checks."""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from mide_lab.errors import InvalidInputError, QuadratureError
from mide_lab.logs import log
from mide_lab.quadrature import (
    DEFAULT_SETTINGS,
    ProductRule,
    QuadratureResult,
    QuadratureSettings,
    Region,
    angular_rule,
    pairwise_sum,
    product_rule,
    radial_rule,
)

# (x: (dim,), z: (N, dim)) -> (N,)
Density = Callable[[np.ndarray, np.ndarray], np.ndarray]
# (x: (dim,), z: (N, dim)) -> (N, dim)
JumpMap = Callable[[np.ndarray, np.ndarray], np.ndarray]
# (z: (N, dim)) -> (N,)
Integrand = Callable[[np.ndarray], np.ndarray]


class KernelKind(StrEnum):
    ISOTROPIC_FRACTIONAL = "isotropic-fractional"
    X_MODULATED = "x-modulated"
    DIRECTIONAL_EMBEDDING = "directional-embedding"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class LevyKernel:
    """A family of Lévy measures μ_x given by densities against Lebesgue measure.

    Directional-embedding kernels are supported on the coordinate subspace
    spanned by `support`; their `base` kernel lives on that subspace and all
    integrals are taken there.
    """

    dim: int
    density: Density
    beta: float
    kind: KernelKind
    tail_radius: float = 1.0
    holder_gamma: float | None = None
    normalization: float = 1.0
    x_dependent: bool = False
    support: tuple[int, ...] | None = None
    base: "LevyKernel | None" = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"kernel dimension must be >= 1, got {self.dim}")
        if not 0.0 < self.beta < 2.0:
            raise InvalidInputError(f"beta must lie in (0, 2), got {self.beta}")
        if self.tail_radius <= 0.0:
            raise InvalidInputError("tail_radius must be positive")
        if self.holder_gamma is not None and not 0.0 < self.holder_gamma <= 1.0:
            raise InvalidInputError(f"holder_gamma must lie in (0, 1], got {self.holder_gamma}")
        if self.kind is KernelKind.DIRECTIONAL_EMBEDDING:
            assert self.support is not None and self.base is not None
            assert self.base.dim == len(self.support)

    @property
    def integration_dim(self) -> int:
        return self.dim if self.support is None else len(self.support)

    def embed(self, w: np.ndarray) -> np.ndarray:
        """Map integration-space points (N, k) into the ambient space (N, dim)."""
        if self.support is None:
            return w
        z = np.zeros((len(w), self.dim))
        z[:, list(self.support)] = w
        return z

    def subspace_density(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        if self.base is None:
            return self.normalization * self.density(x, w)
        return self.normalization * self.base.subspace_density(x, w)


def _power_density(dim: int, beta: float) -> Density:
    def density(x, z):
        r = np.linalg.norm(z, axis=-1)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, r ** (-dim - beta), np.inf)

    return density


def fractional_kernel(dim: int, beta: float, normalization: float = 1.0) -> LevyKernel:
    """The unnormalized fractional kernel |z|^(-dim-beta)."""
    return LevyKernel(
        dim=dim,
        density=_power_density(dim, beta),
        beta=beta,
        kind=KernelKind.ISOTROPIC_FRACTIONAL,
        normalization=normalization,
        name=f"fractional-d{dim}-b{beta:g}",
    )


def modulated_kernel(
    base: LevyKernel, coefficient: Callable[[np.ndarray], float], gamma: float
) -> LevyKernel:
    """The family c(x)·μ_x for a positive Hölder-γ coefficient c."""

    def density(x, z):
        return coefficient(x) * base.density(x, z)

    return LevyKernel(
        dim=base.dim,
        density=density,
        beta=base.beta,
        kind=KernelKind.X_MODULATED,
        tail_radius=base.tail_radius,
        holder_gamma=gamma,
        normalization=base.normalization,
        x_dependent=True,
        name=f"modulated-{base.name}",
    )


def embedded_kernel(base: LevyKernel, ambient_dim: int, support: tuple[int, ...]) -> LevyKernel:
    """Lift a kernel on R^k onto the coordinate subspace `support` of R^ambient_dim."""
    support = tuple(int(i) for i in support)
    if len(support) != base.dim or len(set(support)) != len(support):
        raise InvalidInputError(f"support {support} does not match base dimension {base.dim}")
    if not all(0 <= i < ambient_dim for i in support):
        raise InvalidInputError(f"support {support} outside ambient dimension {ambient_dim}")
    off = [i for i in range(ambient_dim) if i not in support]

    def density(x, z):
        on_subspace = np.all(np.abs(z[:, off]) == 0.0, axis=1) if off else True
        return np.where(on_subspace, base.density(x, z[:, list(support)]), 0.0)

    return LevyKernel(
        dim=ambient_dim,
        density=density,
        beta=base.beta,
        kind=KernelKind.DIRECTIONAL_EMBEDDING,
        tail_radius=base.tail_radius,
        holder_gamma=base.holder_gamma,
        x_dependent=base.x_dependent,
        support=support,
        base=base,
        name=f"embedded-{base.name}-on-{'-'.join(map(str, support))}",
    )


def custom_kernel(
    dim: int,
    density: Density,
    beta: float,
    *,
    x_dependent: bool = False,
    holder_gamma: float | None = None,
    tail_radius: float = 1.0,
    name: str = "custom",
) -> LevyKernel:
    return LevyKernel(
        dim=dim,
        density=density,
        beta=beta,
        kind=KernelKind.CUSTOM,
        tail_radius=tail_radius,
        holder_gamma=holder_gamma,
        x_dependent=x_dependent,
        name=name,
    )


@dataclass(frozen=True, eq=False)
class JumpFunction:
    """A Lévy–Itô jump map j(x, z) with its structural constants.

    `scale`, when given, declares j(x, z) = scale(x)·z.
    """

    dim: int
    map: JumpMap
    c0: float
    C0: float
    gamma: float
    tail_lipschitz: float = 0.0
    scale: Callable[[np.ndarray], float] | None = None
    name: str = ""

    def __post_init__(self):
        if not 0.0 < self.c0 <= self.C0:
            raise InvalidInputError(f"need 0 < c0 <= C0, got c0={self.c0}, C0={self.C0}")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidInputError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.tail_lipschitz < 0.0:
            raise InvalidInputError("tail_lipschitz must be nonnegative")

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.map(np.asarray(x, dtype=float), np.atleast_2d(z))

    @property
    def is_identity(self) -> bool:
        return self.name == "identity"


def identity_jump(dim: int) -> JumpFunction:
    return JumpFunction(dim, lambda x, z: z, 1.0, 1.0, 1.0, 0.0, scale=lambda x: 1.0, name="identity")


def scaled_jump(
    dim: int,
    scale: Callable[[np.ndarray], float],
    c0: float,
    C0: float,
    gamma: float,
    tail_lipschitz: float = 0.0,
    name: str = "scaled",
) -> JumpFunction:
    """j(x, z) = scale(x)·z."""
    return JumpFunction(
        dim, lambda x, z: scale(x) * z, c0, C0, gamma, tail_lipschitz, scale=scale, name=name
    )


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """The cone C_{η,δ}(a) = {z : |z| <= δ, (1-η)|z| <= |â·z|}."""

    axis: np.ndarray
    eta: float
    delta: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise InvalidInputError("cone axis must be nonzero")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidInputError(f"eta must lie in (0, 1], got {self.eta}")
        if self.delta <= 0.0:
            raise InvalidInputError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "axis", axis / norm)

    def contains(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        r = np.linalg.norm(z, axis=1)
        return (r <= self.delta) & ((1.0 - self.eta) * r <= np.abs(z @ self.axis))


def _subspace_cone(kernel: LevyKernel, axis: np.ndarray, eta: float):
    """Project a cone axis into the kernel's integration space.

    Returns (sub_axis, cos_min, degenerate); a degenerate cone carries no mass.
    """
    axis = np.asarray(axis, dtype=float)
    if kernel.support is None:
        return axis / np.linalg.norm(axis), 1.0 - eta, False
    sub = axis[list(kernel.support)]
    sub_norm = np.linalg.norm(sub)
    if sub_norm == 0.0:
        return None, 1.0, True
    cos_min = (1.0 - eta) * np.linalg.norm(axis) / sub_norm
    if cos_min > 1.0:
        return None, cos_min, True
    return sub / sub_norm, cos_min, False


def _rule(
    kernel: LevyKernel,
    r_inner: float,
    r_outer: float,
    region: Region,
    sub_axis: np.ndarray | None,
    cos_min: float,
    order: int,
    angular: int,
    settings: QuadratureSettings,
) -> ProductRule:
    k = kernel.integration_dim
    radial = radial_rule(
        r_inner,
        r_outer,
        order,
        beta=kernel.beta,
        levels=settings.levels,
        max_cell=settings.max_cell,
    )
    return product_rule(k, radial, angular_rule(k, angular, region, sub_axis, cos_min))


def integrate(
    kernel: LevyKernel,
    x: np.ndarray,
    integrand: Integrand | None = None,
    *,
    r_inner: float = 0.0,
    r_outer: float = 1.0,
    region: Region = Region.BALL,
    axis: np.ndarray | None = None,
    eta: float | None = None,
    weight: Density | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
    what: str = "integral",
) -> QuadratureResult:
    """∫ integrand(z) μ_x(dz) over {r_inner < |z| <= r_outer} ∩ region.

    Integrals starting at the origin assume an integrand vanishing like
    |z|^2; unbounded ones assume a bounded integrand. `weight` replaces the
    kernel density (it receives integration-space points), e.g. for
    |μ_x - μ_y|. The integrand receives ambient points.
    """
    x = np.asarray(x, dtype=float)
    sub_axis, cos_min = None, 0.0
    if region is not Region.BALL:
        if axis is None or eta is None:
            raise InvalidInputError("cone regions need an axis and an eta")
        sub_axis, cos_min, degenerate = _subspace_cone(kernel, axis, eta)
        if degenerate:
            if region is Region.CONE:
                return QuadratureResult(0.0, 0.0, degenerate=True)
            region = Region.BALL

    if weight is None:
        weight = lambda w: kernel.subspace_density(x, w)  # noqa: E731

    def evaluate(order: int, angular: int) -> float:
        rule = _rule(kernel, r_inner, r_outer, region, sub_axis, cos_min, order, angular, settings)
        if len(rule) == 0:
            return 0.0
        values = weight(rule.points)
        if integrand is not None:
            values = values * integrand(kernel.embed(rule.points))
        return pairwise_sum(rule.weights * values)

    value = evaluate(settings.order, settings.angular)
    check = evaluate(settings.check_order, settings.angular + settings.angular // 2)
    result = QuadratureResult(value, abs(value - check))
    if settings.enforce and not result.within(settings):
        log.warning(f"Quadrature of {what} did not converge", value=value, error=result.error)
        raise QuadratureError(
            f"{what}: error estimate {result.error:.3e} exceeds tolerance", value, result.error
        )
    return result


def squared_norm(z: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", z, z)


def cone_mass(
    kernel: LevyKernel,
    cone: ConeSpec,
    x: np.ndarray | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> QuadratureResult:
    """∫_{C_{η,δ}(a)} |z|^2 μ_x(dz); exact 0 flagged degenerate when the cone
    misses the support of a directional kernel."""
    if len(cone.axis) != kernel.dim:
        raise InvalidInputError(f"cone axis has dimension {len(cone.axis)}, kernel {kernel.dim}")
    if cone.delta > kernel.tail_radius:
        raise InvalidInputError(f"cone radius {cone.delta} exceeds tail radius {kernel.tail_radius}")
    x = np.zeros(kernel.dim) if x is None else np.asarray(x, dtype=float)
    return integrate(
        kernel,
        x,
        squared_norm,
        r_outer=cone.delta,
        region=Region.CONE,
        axis=cone.axis,
        eta=cone.eta,
        settings=settings,
        what="cone mass",
    )


def tail_mass(
    kernel: LevyKernel,
    x: np.ndarray,
    radius: float = 1.0,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> float:
    """μ_x(|z| > radius)."""
    return integrate(
        kernel, x, None, r_inner=radius, r_outer=math.inf, settings=settings, what="tail mass"
    ).value


def cone_constant_example(d: int, beta: float, eta: float, delta: float) -> float:
    """Closed form of ∫_{C_{η,δ}} |z|^2 |z|^(-d-β) dz for the double cone."""
    if d not in (1, 2, 3):
        raise InvalidInputError(f"closed form available for d in 1..3, got {d}")
    if not 0.0 < beta < 2.0 or not 0.0 <= eta <= 1.0 or delta <= 0.0:
        raise InvalidInputError(f"out of domain: beta={beta}, eta={eta}, delta={delta}")
    radial = delta ** (2.0 - beta) / (2.0 - beta)
    match d:
        case 1:
            angular = 2.0 if eta > 0.0 else 0.0
        case 2:
            angular = 4.0 * math.acos(1.0 - eta)
        case 3:
            angular = 4.0 * math.pi * eta
    return angular * radial


@dataclass(frozen=True)
class SamplePlan:
    """Finite samples standing in for the continua the conditions quantify over."""

    points: tuple[tuple[float, ...], ...]
    axes: tuple[tuple[float, ...], ...]
    radii: tuple[float, ...]
    apertures: tuple[float, ...]
    separations: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    jump_radii: tuple[float, ...] = (1e-3, 1e-2, 0.1, 0.5, 1.0)
    tail_radii: tuple[float, ...] = (1.5, 2.0, 4.0)

    def validate(self, dim: int):
        for name in ("points", "axes", "radii", "apertures", "separations"):
            if len(getattr(self, name)) == 0:
                raise InvalidInputError(f"sample plan has no {name}")
        for vector in self.points + self.axes:
            if len(vector) != dim:
                raise InvalidInputError(f"sample plan vector {vector} is not {dim}-dimensional")
        if any(not 0.0 < r < 1.0 for r in self.radii):
            raise InvalidInputError("sample plan radii must lie in (0, 1)")
        if any(not 0.0 < eta <= 1.0 for eta in self.apertures):
            raise InvalidInputError("sample plan apertures must lie in (0, 1]")

    def describe(self) -> dict:
        return {
            "points": len(self.points),
            "axes": len(self.axes),
            "radii": list(self.radii),
            "apertures": list(self.apertures),
            "separations": list(self.separations),
        }


def default_plan(dim: int) -> SamplePlan:
    axes = [tuple(float(v) for v in e) for e in np.eye(dim)]
    if dim > 1:
        axes.append(tuple([1.0 / math.sqrt(dim)] * dim))
    return SamplePlan(
        points=((0.0,) * dim, (0.3,) * dim, (0.55,) * dim),
        axes=tuple(axes),
        radii=(0.5, 0.25, 0.1, 0.05),
        apertures=(0.1, 0.5, 0.9),
    )


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    constants: dict[str, float] = field(default_factory=dict)
    notes: str = ""


@dataclass(frozen=True)
class ConditionReport:
    subject: str
    plan: dict
    results: dict[str, ConditionResult]

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results.values())

    def to_record(self) -> dict:
        """Flatten into a single key-value record."""
        record: dict = {"subject": self.subject}
        for name, result in self.results.items():
            record[f"{name}.passed"] = result.passed
            for key, value in result.constants.items():
                record[f"{name}.{key}"] = value
            if result.notes:
                record[f"{name}.notes"] = result.notes
        return record


def first_moment_scale(delta: float, beta: float) -> float:
    """Normalization of ∫_{B\\B_δ}|z| μ: δ^(1-β), |ln δ| at β = 1, and 1 for β < 1
    where the integral stays bounded."""
    if beta > 1.0:
        return delta ** (1.0 - beta)
    if beta == 1.0:
        return abs(math.log(delta))
    return 1.0


def _slope(xs: list[float], ys: list[float]) -> float:
    xs_, ys_ = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    slope, _ = np.polyfit(xs_, ys_, 1)
    return float(slope)


def _m1(kernel: LevyKernel, plan: SamplePlan, settings: QuadratureSettings) -> ConditionResult:
    values = []
    for x in plan.points:
        inner = integrate(kernel, x, squared_norm, r_outer=1.0, settings=settings, what="(M1) ball")
        values.append(inner.value + tail_mass(kernel, np.asarray(x), 1.0, settings))
    c_tilde = max(values)
    return ConditionResult("M1", bool(np.isfinite(c_tilde)), {"C_tilde_mu": c_tilde})


def _m2(kernel: LevyKernel, plan: SamplePlan, settings: QuadratureSettings) -> ConditionResult:
    constants: dict[str, float] = {}
    d = kernel.dim
    per_axis = []
    for i, axis in enumerate(plan.axes):
        best_constant, best_eta = 0.0, plan.apertures[0]
        for eta in plan.apertures:
            ratios = []
            for x in plan.points:
                for delta in plan.radii:
                    mass = cone_mass(kernel, ConeSpec(np.asarray(axis), eta, delta), x, settings)
                    ratios.append(mass.value / (eta ** ((d - 1) / 2) * delta ** (2 - kernel.beta)))
            if min(ratios) > best_constant:
                best_constant, best_eta = min(ratios), eta
        constants[f"C_mu[{i}]"] = best_constant
        constants[f"eta[{i}]"] = best_eta
        per_axis.append(best_constant)

    masses = [
        cone_mass(kernel, ConeSpec(np.asarray(plan.axes[0]), max(plan.apertures), delta), plan.points[0], settings).value
        for delta in plan.radii
    ]
    if all(m > 0.0 for m in masses) and len(masses) > 1:
        constants["delta_exponent"] = _slope(list(plan.radii), masses)
    constants["C_mu"] = min(per_axis)
    failed = [i for i, c in enumerate(per_axis) if c <= 1e-12]
    notes = f"fails on axes {failed}" if failed else ""
    if failed:
        log.info(f"(M2) fails for {kernel.name}", failed_axes=failed)
    return ConditionResult("M2", not failed, constants, notes)


def difference_weight(kernel: LevyKernel, x: np.ndarray, y: np.ndarray) -> Density:
    return lambda w: np.abs(kernel.subspace_density(x, w) - kernel.subspace_density(y, w))


def _pair_direction(dim: int) -> np.ndarray:
    return np.ones(dim) / math.sqrt(dim)


def _m3(kernel: LevyKernel, plan: SamplePlan, settings: QuadratureSettings) -> ConditionResult:
    gamma = kernel.holder_gamma or 1.0
    if not kernel.x_dependent:
        return ConditionResult("M3", True, {"C_mu": 0.0, "gamma": gamma}, "x-independent")
    beta = kernel.beta
    constant = 0.0
    slopes = []
    for x in plan.points:
        x = np.asarray(x, dtype=float)
        seps, scaled = [], []
        for s in plan.separations:
            y = x + s * _pair_direction(kernel.dim)
            weight = difference_weight(kernel, x, y)
            worst = 0.0
            for delta in plan.radii:
                inner = integrate(
                    kernel, x, squared_norm, r_outer=delta, weight=weight, settings=settings, what="(M3) ball"
                ).value
                ring = integrate(
                    kernel,
                    x,
                    lambda z: np.sqrt(squared_norm(z)),
                    r_inner=delta,
                    r_outer=1.0,
                    weight=weight,
                    settings=settings,
                    what="(M3) ring",
                ).value
                worst = max(worst, inner / delta ** (2 - beta))
                constant = max(
                    constant,
                    inner / (s**gamma * delta ** (2 - beta)),
                    ring / (s**gamma * first_moment_scale(delta, beta)),
                )
            if worst > 0.0:
                seps.append(s)
                scaled.append(worst)
        if len(seps) > 1:
            slopes.append(_slope(seps, scaled))
    fitted = min(slopes) if slopes else float("inf")
    passed = bool(np.isfinite(constant)) and fitted >= gamma - 0.1
    constants = {"C_mu": constant, "gamma": gamma}
    if slopes:
        constants["fitted_gamma"] = fitted
    return ConditionResult("M3", passed, constants)


def verify_measure_conditions(
    kernel: LevyKernel,
    plan: SamplePlan | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> ConditionReport:
    """Check (M1)-(M3) on the sample plan and report the empirical constants."""
    plan = default_plan(kernel.dim) if plan is None else plan
    plan.validate(kernel.dim)
    results = {
        "M1": _m1(kernel, plan, settings),
        "M2": _m2(kernel, plan, settings),
        "M3": _m3(kernel, plan, settings),
    }
    report = ConditionReport(kernel.name, plan.describe(), results)
    log.info(
        f"Measure conditions for {kernel.name}",
        **{name: result.passed for name, result in results.items()},
    )
    return report


@dataclass(frozen=True)
class MeasureConstants:
    """Measured constants consumed by the estimate evaluators."""

    c_tilde: float
    c_cone: float
    eta: float
    c_holder: float
    gamma: float


def measure_constants(
    kernel: LevyKernel,
    plan: SamplePlan | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> MeasureConstants:
    report = verify_measure_conditions(kernel, plan, settings)
    m2 = report.results["M2"].constants
    m3 = report.results["M3"].constants
    best_axis = min(
        (key for key in m2 if key.startswith("C_mu[")), key=lambda key: m2[key]
    )
    return MeasureConstants(
        c_tilde=report.results["M1"].constants["C_tilde_mu"],
        c_cone=m2["C_mu"],
        eta=m2[best_axis.replace("C_mu", "eta")],
        c_holder=m3["C_mu"],
        gamma=m3["gamma"],
    )


def _sample_directions(dim: int) -> np.ndarray:
    dirs, _ = angular_rule(dim, 8)
    return dirs


def _j1(jump: JumpFunction, kernel: LevyKernel, plan: SamplePlan, settings) -> ConditionResult:
    values = []
    for x in plan.points:
        x = np.asarray(x, dtype=float)
        inner = integrate(
            kernel, x, lambda z: squared_norm(jump(x, z)), r_outer=1.0, settings=settings, what="(J1) ball"
        ).value
        values.append(inner + tail_mass(kernel, x, 1.0, settings))
    c_tilde = max(values)
    return ConditionResult("J1", bool(np.isfinite(c_tilde)), {"C_tilde_mu": c_tilde})


def jump_cone_mass(
    jump: JumpFunction,
    kernel: LevyKernel,
    x: np.ndarray,
    axis: np.ndarray,
    eta: float,
    delta: float,
    settings: QuadratureSettings,
) -> float:
    """∫ |j|^2 over {z : |j(x,z)| <= δ, (1-η)|j| <= |â·j|}."""
    if jump.scale is not None:
        s = abs(jump.scale(x))
        radius = min(delta / s, kernel.tail_radius)
        return s**2 * cone_mass(kernel, ConeSpec(axis, eta, radius), x, settings).value
    axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)

    def integrand(z):
        j = jump(x, z)
        norm = np.sqrt(squared_norm(j))
        inside = (norm <= delta) & ((1.0 - eta) * norm <= np.abs(j @ axis))
        return np.where(inside, norm**2, 0.0)

    loose = QuadratureSettings(
        order=settings.order,
        check_order=settings.check_order,
        angular=4 * settings.angular,
        levels=settings.levels,
        enforce=False,
    )
    radius = min(delta / jump.c0, kernel.tail_radius)
    return integrate(kernel, x, integrand, r_outer=radius, settings=loose).value


def _j2(jump: JumpFunction, kernel: LevyKernel, plan: SamplePlan, settings) -> ConditionResult:
    constants: dict[str, float] = {}
    d = kernel.dim
    per_axis = []
    for i, axis in enumerate(plan.axes):
        best = 0.0
        for eta in plan.apertures:
            ratios = [
                jump_cone_mass(jump, kernel, np.asarray(x, dtype=float), np.asarray(axis), eta, delta, settings)
                / (eta ** ((d - 1) / 2) * delta ** (2 - kernel.beta))
                for x in plan.points
                for delta in plan.radii
            ]
            best = max(best, min(ratios))
        constants[f"C_mu[{i}]"] = best
        per_axis.append(best)
    constants["C_mu"] = min(per_axis)
    failed = [i for i, c in enumerate(per_axis) if c <= 1e-12]
    return ConditionResult("J2", not failed, constants, f"fails on axes {failed}" if failed else "")


def _j3(kernel: LevyKernel, plan: SamplePlan, settings) -> ConditionResult:
    beta = kernel.beta
    power, logarithmic, rings = 0.0, 0.0, []
    for x in plan.points:
        for delta in plan.radii:
            ring = integrate(
                kernel,
                x,
                lambda z: np.sqrt(squared_norm(z)),
                r_inner=delta,
                r_outer=1.0,
                settings=settings,
                what="(J3) ring",
            ).value
            power_scale = delta ** (1.0 - beta) if beta >= 1.0 else 1.0
            power = max(power, ring / power_scale)
            logarithmic = max(logarithmic, ring / abs(math.log(delta)))
            if x == plan.points[0]:
                rings.append(ring)
    branch = "log" if beta == 1.0 else "power"
    constant = logarithmic if beta == 1.0 else power
    constants = {"C_tilde_power": power, "C_tilde_log": logarithmic, "C_tilde_mu": constant}
    if len(rings) > 1:
        constants["delta_exponent"] = _slope(list(plan.radii), rings)
    return ConditionResult("J3", bool(np.isfinite(constant)), constants, f"{branch} branch")


def _j4(jump: JumpFunction, plan: SamplePlan) -> ConditionResult:
    dirs = _sample_directions(jump.dim)
    z = np.concatenate([r * dirs for r in plan.jump_radii])
    norms = np.sqrt(squared_norm(z))
    lower, upper, holder = np.inf, 0.0, 0.0
    for x in plan.points:
        x = np.asarray(x, dtype=float)
        ratio = np.sqrt(squared_norm(jump(x, z))) / norms
        lower, upper = min(lower, ratio.min()), max(upper, ratio.max())
        for s in plan.separations:
            y = x + s * _pair_direction(jump.dim)
            diff = np.sqrt(squared_norm(jump(x, z) - jump(y, z)))
            holder = max(holder, float(np.max(diff / (norms * s**jump.gamma))))
    tol = 1e-9
    passed = lower >= jump.c0 - tol and upper <= jump.C0 + tol and holder <= jump.C0 + tol
    return ConditionResult("J4", bool(passed), {"c0": float(lower), "C0": float(upper), "holder": holder})


def _j5(jump: JumpFunction, plan: SamplePlan) -> ConditionResult:
    dirs = _sample_directions(jump.dim)
    z = np.concatenate([r * dirs for r in plan.tail_radii])
    worst = 0.0
    for x in plan.points:
        x = np.asarray(x, dtype=float)
        for s in plan.separations:
            y = x + s * _pair_direction(jump.dim)
            diff = np.sqrt(squared_norm(jump(x, z) - jump(y, z)))
            worst = max(worst, float(np.max(diff)) / s**jump.gamma)
    return ConditionResult("J5", worst <= jump.tail_lipschitz + 1e-9, {"C_tilde_0": worst})


def verify_jump_conditions(
    jump: JumpFunction,
    kernel: LevyKernel,
    plan: SamplePlan | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> ConditionReport:
    """Check (J1)-(J5) on the sample plan and report the empirical constants."""
    if jump.dim != kernel.dim:
        raise InvalidInputError(f"jump dimension {jump.dim} differs from kernel dimension {kernel.dim}")
    plan = default_plan(kernel.dim) if plan is None else plan
    plan.validate(kernel.dim)
    results = {
        "J1": _j1(jump, kernel, plan, settings),
        "J2": _j2(jump, kernel, plan, settings),
        "J3": _j3(kernel, plan, settings),
        "J4": _j4(jump, plan),
        "J5": _j5(jump, plan),
    }
    log.info(
        f"Jump conditions for {jump.name} on {kernel.name}",
        **{name: result.passed for name, result in results.items()},
    )
    return ConditionReport(f"{jump.name}/{kernel.name}", plan.describe(), results)
