"""Mixed integro-differential equations on the periodic grid, solved by monotone
explicit pseudo-time marching."""

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from mide_lab.errors import DivergenceError, InstabilityError, InvalidInputError
from mide_lab.grid import Block, Field, Geometry, GridFunction
from mide_lab.levy import JumpFunction, KernelKind, LevyKernel, fractional_kernel
from mide_lab.logs import log
from mide_lab.operators import (
    DEFAULT_OPERATOR_SETTINGS,
    OperatorSettings,
    SplitSpec,
    apply_nonlocal,
    fractional_laplacian_spectral,
    fractional_symbol,
)

# a coefficient is a constant or a field evaluated on the lattice coordinates
Coefficient = float | Field

GRADIENT_FLOOR = 1e-12
MAX_CONTROLS = 16


@lru_cache(maxsize=256)
def _field_values(coefficient: Coefficient, geometry: Geometry) -> np.ndarray:
    if callable(coefficient):
        values = np.broadcast_to(np.asarray(coefficient(geometry.coords()), dtype=float), geometry.shape)
    else:
        values = np.full(geometry.shape, float(coefficient))
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("coefficient field has non-finite values")
    values = np.array(values)
    values.setflags(write=False)
    return values


def field_values(coefficient: Coefficient, geometry: Geometry) -> np.ndarray:
    return _field_values(coefficient, geometry)


@dataclass(frozen=True)
class EllipticityProfile:
    """Structure constants of the equation, carried into experiment reports."""

    Lambda1: Coefficient = 1.0
    Lambda2: Coefficient = 1.0
    Lambda0: float = 1.0
    k: float = 0.0
    tau: float = 1.0
    theta: float = 1.0
    theta_tilde: float = 1.0
    C1: float = 0.0
    C2: float = 0.0
    gamma_tilde: float = 0.0

    def __post_init__(self):
        if self.Lambda0 <= 0.0:
            raise InvalidInputError(f"Lambda0 must be positive, got {self.Lambda0}")
        if self.k < 0.0 or self.C1 < 0.0 or self.C2 < 0.0:
            raise InvalidInputError("k, C1 and C2 must be nonnegative")
        for name in ("tau", "theta", "theta_tilde"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise InvalidInputError(f"{name} must lie in (0, 1], got {getattr(self, name)}")

    def validate(self, geometry: Geometry):
        total = field_values(self.Lambda1, geometry) + field_values(self.Lambda2, geometry)
        if np.min(total) < self.Lambda0:
            raise InvalidInputError(
                f"Lambda1 + Lambda2 drops to {np.min(total):.6g} below Lambda0 = {self.Lambda0}"
            )

    def describe(self) -> dict:
        return {
            name: value
            for name, value in dataclasses.asdict(self).items()
            if not callable(value)
        }


def _upwind_magnitude(values: np.ndarray, h: float, axes: tuple[int, ...], sign: np.ndarray) -> np.ndarray:
    """|D u| from one-sided differences, oriented so b·|Du|^k is monotone."""
    total = np.zeros_like(values)
    for axis in axes:
        backward = (values - np.roll(values, 1, axis=axis)) / h
        forward = (np.roll(values, -1, axis=axis) - values) / h
        increasing = np.maximum(np.maximum(backward, -forward), 0.0)
        decreasing = np.maximum(np.maximum(-backward, forward), 0.0)
        component = np.where(sign >= 0.0, increasing, decreasing)
        total += component**2
    return np.sqrt(total)


def _centered_magnitude(u: GridFunction, axes: tuple[int, ...]) -> np.ndarray:
    return np.sqrt(np.sum(u.gradient_field[list(axes)] ** 2, axis=0))


@dataclass(frozen=True, eq=False)
class LocalTrace:
    """-a(x)·tr(A D²_block u); A is the identity unless a constant matrix is given."""

    coefficient: Coefficient = 1.0
    block: Block = "full"
    matrix: np.ndarray | None = None

    def _matrix(self, geometry: Geometry) -> np.ndarray:
        size = len(geometry.axes(self.block))
        if self.matrix is None:
            return np.eye(size)
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.shape != (size, size) or not np.allclose(matrix, matrix.T):
            raise InvalidInputError(f"diffusion matrix must be symmetric {size}x{size}")
        if np.min(np.linalg.eigvalsh(matrix)) < -1e-12:
            raise InvalidInputError("diffusion matrix must be positive semidefinite")
        return matrix

    def evaluate(self, u: GridFunction) -> np.ndarray:
        g = u.geometry
        axes = g.axes(self.block)
        matrix = self._matrix(g)
        hessian = u.hessian_field
        trace = np.zeros(g.shape)
        for i, ai in enumerate(axes):
            for j, aj in enumerate(axes):
                if matrix[i, j] != 0.0:
                    trace += matrix[i, j] * hessian[ai, aj]
        return -field_values(self.coefficient, g) * trace

    def stiffness(self, u: GridFunction) -> float:
        g = u.geometry
        a_max = float(np.max(np.abs(field_values(self.coefficient, g))))
        return a_max * 4.0 * float(np.sum(np.abs(self._matrix(g)))) / g.h**2

    def dissipative(self, geometry: Geometry) -> bool:
        values = field_values(self.coefficient, geometry)
        if np.min(values) < 0.0:
            raise InvalidInputError("diffusion coefficient must be nonnegative")
        return bool(np.max(values) > 0.0)


@dataclass(frozen=True, eq=False)
class Nonlocal:
    """-sign·c(x)·I[x,u] on a coordinate block.

    Isotropic-fractional kernels without a jump (or with the identity jump)
    are applied through the Fourier multiplier unless `force_quadrature`.
    """

    kernel: LevyKernel
    coefficient: Coefficient = 1.0
    block: Block = "full"
    sign: float = 1.0
    jump: JumpFunction | None = None
    force_quadrature: bool = False
    delta: float = 0.5
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS

    @property
    def spectral(self) -> bool:
        plain = self.jump is None or self.jump.is_identity
        return self.kernel.kind is KernelKind.ISOTROPIC_FRACTIONAL and plain and not self.force_quadrature

    def _check(self, geometry: Geometry):
        size = len(geometry.axes(self.block))
        if self.kernel.dim != size:
            raise InvalidInputError(
                f"kernel dimension {self.kernel.dim} does not match block {self.block!r} of size {size}"
            )

    def evaluate(self, u: GridFunction) -> np.ndarray:
        g = u.geometry
        self._check(g)
        c = field_values(self.coefficient, g)
        if self.spectral:
            minus_integral = self.kernel.normalization * fractional_laplacian_spectral(
                u, self.kernel.beta, self.block
            ).values
            return self.sign * c * minus_integral
        integral = apply_nonlocal(
            self.kernel, u, SplitSpec(self.delta), block=self.block, jump=self.jump, settings=self.settings
        ).values
        return -self.sign * c * integral

    def stiffness(self, u: GridFunction) -> float:
        g = u.geometry
        size = len(g.axes(self.block))
        c_max = float(np.max(np.abs(field_values(self.coefficient, g))))
        nyquist = math.pi * g.n * math.sqrt(size)
        symbol = float(fractional_symbol(size, self.kernel.beta, np.array(nyquist)))
        jump_scale = 1.0 if self.jump is None else self.jump.C0**self.kernel.beta
        return c_max * self.kernel.normalization * symbol * jump_scale

    def dissipative(self, geometry: Geometry) -> bool:
        values = field_values(self.coefficient, geometry)
        if self.sign * np.min(values) < 0.0:
            raise InvalidInputError("nonlocal term must enter with a nonnegative coefficient")
        return bool(self.sign * np.max(values) > 0.0)


@dataclass(frozen=True, eq=False)
class GradientPower:
    """b(x)·min(|D_block u|, R)^k with upwind gradients for k >= 1."""

    coefficient: Coefficient = 1.0
    exponent: float = 1.0
    block: Block = "full"
    cutoff: float = math.inf

    def __post_init__(self):
        if self.exponent < 0.0:
            raise InvalidInputError(f"gradient exponent must be nonnegative, got {self.exponent}")
        if self.cutoff < 0.0:
            raise InvalidInputError(f"cutoff must be nonnegative, got {self.cutoff}")

    def magnitude(self, u: GridFunction) -> np.ndarray:
        g = u.geometry
        axes = g.axes(self.block)
        if self.exponent >= 1.0:
            b = field_values(self.coefficient, g)
            magnitude = _upwind_magnitude(u.values, g.h, axes, b)
        else:
            magnitude = np.maximum(_centered_magnitude(u, axes), GRADIENT_FLOOR)
        return np.minimum(magnitude, self.cutoff)

    def evaluate(self, u: GridFunction) -> np.ndarray:
        return field_values(self.coefficient, u.geometry) * self.magnitude(u) ** self.exponent

    def stiffness(self, u: GridFunction) -> float:
        g = u.geometry
        b_max = float(np.max(np.abs(field_values(self.coefficient, g))))
        size = len(g.axes(self.block))
        if self.exponent == 0.0:
            return 0.0
        gradient = float(np.max(self.magnitude(u)))
        slope = self.exponent * max(gradient, 1.0) ** (self.exponent - 1.0)
        return b_max * slope * size / g.h

    def dissipative(self, geometry: Geometry) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class Drift:
    """b(x)·D_block u with b⁺D⁻ + b⁻D⁺ upwinding."""

    velocity: tuple[Coefficient, ...]
    block: Block = "full"

    def _components(self, geometry: Geometry) -> list[tuple[int, np.ndarray]]:
        axes = geometry.axes(self.block)
        if len(self.velocity) != len(axes):
            raise InvalidInputError(f"drift needs {len(axes)} components, got {len(self.velocity)}")
        return [(axis, field_values(b, geometry)) for axis, b in zip(axes, self.velocity)]

    def evaluate(self, u: GridFunction) -> np.ndarray:
        g = u.geometry
        total = np.zeros(g.shape)
        for axis, b in self._components(g):
            backward = (u.values - np.roll(u.values, 1, axis=axis)) / g.h
            forward = (np.roll(u.values, -1, axis=axis) - u.values) / g.h
            total += np.maximum(b, 0.0) * backward + np.minimum(b, 0.0) * forward
        return total

    def stiffness(self, u: GridFunction) -> float:
        g = u.geometry
        return sum(float(np.max(np.abs(b))) for _, b in self._components(g)) / g.h

    def dissipative(self, geometry: Geometry) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class ZerothOrder:
    c: float

    def evaluate(self, u: GridFunction) -> np.ndarray:
        return self.c * u.values

    def stiffness(self, u: GridFunction) -> float:
        return abs(self.c)

    def dissipative(self, geometry: Geometry) -> bool:
        return False


Term = LocalTrace | Nonlocal | GradientPower | Drift | ZerothOrder


@dataclass(frozen=True, eq=False)
class ControlVariant:
    """One (γ, δ) choice: its terms and its forcing f^{γ,δ}."""

    terms: tuple[Term, ...] = ()
    forcing: Coefficient = 0.0

    def evaluate(self, u: GridFunction) -> np.ndarray:
        total = -field_values(self.forcing, u.geometry)
        for term in self.terms:
            total = total + term.evaluate(u)
        return total

    def stiffness(self, u: GridFunction) -> float:
        return sum(term.stiffness(u) for term in self.terms)


def _forcing_norm(forcing: "Coefficient | GridFunction", geometry: Geometry) -> float:
    if isinstance(forcing, GridFunction):
        return forcing.sup_norm()
    return float(np.max(np.abs(field_values(forcing, geometry))))


@dataclass(frozen=True, eq=False)
class EquationSpec:
    """Σ terms(u) + sup_γ inf_δ (terms^{γ,δ}(u) - f^{γ,δ}) = f on the torus."""

    geometry: Geometry
    terms: tuple[Term, ...]
    forcing: Coefficient | GridFunction = 0.0
    controls: tuple[tuple[ControlVariant, ...], ...] = ()
    profile: EllipticityProfile | None = None
    name: str = "equation"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "controls", tuple(tuple(row) for row in self.controls))
        if self.controls:
            if len(self.controls) > MAX_CONTROLS or any(
                not row or len(row) > MAX_CONTROLS for row in self.controls
            ):
                raise InvalidInputError(f"control families need 1 to {MAX_CONTROLS} variants each")
            if len({len(row) for row in self.controls}) != 1:
                raise InvalidInputError("every γ must offer the same number of δ variants")
        if isinstance(self.forcing, GridFunction) and self.forcing.geometry != self.geometry:
            raise InvalidInputError("forcing lives on a different geometry")
        if not self._has_dissipation():
            raise InvalidInputError(
                "an equation needs a local-trace or nonlocal term with positive coefficient, "
                "or a positive zeroth-order term"
            )
        if self.profile is not None:
            self.profile.validate(self.geometry)

    def _has_dissipation(self) -> bool:
        g = self.geometry
        if any(term.dissipative(g) for term in self.terms) or self.zeroth_order > 0.0:
            return True
        return bool(self.controls) and all(
            any(term.dissipative(g) for term in variant.terms)
            for row in self.controls
            for variant in row
        )

    @property
    def zeroth_order(self) -> float:
        return sum(term.c for term in self.terms if isinstance(term, ZerothOrder))

    @property
    def heat_type(self) -> bool:
        return not self.controls and all(
            isinstance(term, LocalTrace) or (isinstance(term, Nonlocal) and term.sign > 0)
            for term in self.terms
        )

    @property
    def profile_checked(self) -> bool:
        return self.profile is not None

    @cached_property
    def plain(self) -> "EquationSpec":
        """Without controls when a single (γ, δ) is offered, so such a spec and
        its fixed-control equation are evaluated by the same sums."""
        if len(self.controls) == 1 and len(self.controls[0]) == 1:
            return fixed_control_spec(self, 0, 0)
        return self

    def forcing_values(self) -> np.ndarray:
        if isinstance(self.forcing, GridFunction):
            return self.forcing.values
        return field_values(self.forcing, self.geometry)

    def forcing_norm(self) -> float:
        norm = _forcing_norm(self.forcing, self.geometry)
        if self.controls:
            norm += max(
                _forcing_norm(variant.forcing, self.geometry) for row in self.controls for variant in row
            )
        return norm

    def regrid(self, n: int) -> "EquationSpec":
        if isinstance(self.forcing, GridFunction):
            raise InvalidInputError("a spec with a sampled forcing cannot be regridded")
        return dataclasses.replace(self, geometry=self.geometry.regrid(n))

    def with_terms(self, terms, controls=None) -> "EquationSpec":
        return dataclasses.replace(
            self, terms=tuple(terms), controls=self.controls if controls is None else controls
        )


def _control_values(spec: EquationSpec, u: GridFunction) -> np.ndarray:
    """Variant values stacked as (Γ, Δ, *grid)."""
    return np.stack([np.stack([variant.evaluate(u) for variant in row]) for row in spec.controls])


def residual(spec: EquationSpec, u: GridFunction) -> GridFunction:
    """F(u) - f pointwise."""
    if u.geometry != spec.geometry:
        raise InvalidInputError(f"field geometry {u.geometry} differs from spec {spec.geometry}")
    spec = spec.plain
    total = -spec.forcing_values()
    for term in spec.terms:
        total = total + term.evaluate(u)
    if spec.controls:
        total = total + _control_values(spec, u).min(axis=1).max(axis=0)
    return u.with_values(total)


def stiffness(spec: EquationSpec, u: GridFunction) -> float:
    spec = spec.plain
    total = sum(term.stiffness(u) for term in spec.terms)
    if spec.controls:
        total += max(variant.stiffness(u) for row in spec.controls for variant in row)
    return total


def cfl_dt(spec: EquationSpec, u: GridFunction) -> float:
    """dt = 0.5 / Σ term stiffness."""
    total = stiffness(spec, u)
    return 0.5 / total if total > 0.0 else 0.5


@dataclass(frozen=True, eq=False)
class Solution:
    u: GridFunction
    record: list[tuple[int, float, float]]
    steps: int
    active: np.ndarray | None = None

    @property
    def residual_norm(self) -> float:
        return self.record[-1][1]


def _march(
    spec: EquationSpec, init: GridFunction, tol: float, max_steps: int, record_every: int, what: str
) -> Solution:
    if tol <= 0.0 or max_steps < 1 or record_every < 1:
        raise InvalidInputError("need tol > 0, max_steps >= 1 and record_every >= 1")
    u = init
    record: list[tuple[int, float, float]] = []
    for step in range(max_steps + 1):
        r = residual(spec, u)
        norm = r.sup_norm()
        dt = cfl_dt(spec, u)
        if step % record_every == 0 or norm <= tol:
            record.append((step, norm, dt))
        if norm <= tol:
            log.info(f"{what} converged", equation=spec.name, steps=step, residual=norm)
            return Solution(u, record, step)
        if step == max_steps:
            break
        values = u.values - dt * r.values
        if not np.all(np.isfinite(values)):
            record.append((step, math.inf, dt))
            raise DivergenceError(f"{what} produced non-finite values at step {step}", record)
        u = u.with_values(values)
    log.warning(f"{what} did not converge", equation=spec.name, steps=max_steps, residual=norm)
    raise DivergenceError(
        f"{what} of {spec.name} stopped at residual {norm:.3e} > {tol:.1e} after {max_steps} steps", record
    )


def solve_stationary(
    spec: EquationSpec,
    init: GridFunction | None = None,
    tol: float = 1e-8,
    max_steps: int = 100_000,
    record_every: int = 100,
) -> Solution:
    """Iterate u ← u - dt·residual(u) until ‖residual‖∞ <= tol."""
    init = GridFunction.constant(spec.geometry, 0.0) if init is None else init
    return _march(spec, init, tol, max_steps, record_every, "Stationary solve")


def active_controls(spec: EquationSpec, u: GridFunction) -> np.ndarray:
    """Pointwise (γ, δ) selection of sup_γ inf_δ, shape (2, *grid)."""
    values = _control_values(spec, u)
    inner = values.argmin(axis=1)
    gamma = values.min(axis=1).argmax(axis=0)
    delta = np.take_along_axis(inner, gamma[None], axis=0)[0]
    return np.stack([gamma, delta])


def solve_isaacs(
    spec: EquationSpec,
    init: GridFunction | None = None,
    tol: float = 1e-8,
    max_steps: int = 100_000,
    record_every: int = 100,
) -> Solution:
    """Pseudo-time marching on the sup-inf residual; records the active
    controls of the converged field."""
    if not spec.controls:
        raise InvalidInputError("solve_isaacs needs control families")
    init = GridFunction.constant(spec.geometry, 0.0) if init is None else init
    solution = _march(spec, init, tol, max_steps, record_every, "Isaacs solve")
    return dataclasses.replace(solution, active=active_controls(spec, solution.u))


def control_residual(spec: EquationSpec, u: GridFunction, active: np.ndarray) -> GridFunction:
    """Residual with the controls frozen at a selection field."""
    values = _control_values(spec, u)
    selected = values[active[0], active[1], *np.indices(spec.geometry.shape)]
    total = -spec.forcing_values() + selected
    for term in spec.terms:
        total = total + term.evaluate(u)
    return u.with_values(total)


@dataclass(frozen=True)
class FieldSum:
    parts: tuple[Coefficient, ...]

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        return sum(part(coords) if callable(part) else part for part in self.parts)


def fixed_control_spec(spec: EquationSpec, gamma: int, delta: int) -> EquationSpec:
    """The equation with the controls frozen at (γ, δ)."""
    variant = spec.controls[gamma][delta]
    if isinstance(spec.forcing, GridFunction):
        forcing = spec.forcing.with_values(
            spec.forcing.values + field_values(variant.forcing, spec.geometry)
        )
    elif callable(spec.forcing) or callable(variant.forcing):
        forcing = FieldSum((spec.forcing, variant.forcing))
    else:
        forcing = float(spec.forcing) + float(variant.forcing)
    return dataclasses.replace(
        spec,
        terms=spec.terms + variant.terms,
        forcing=forcing,
        controls=(),
        name=f"{spec.name}[{gamma},{delta}]",
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    snapshots: list[GridFunction]
    record: list[tuple[int, float, float]] = field(default_factory=list)
    max_principle_ok: bool | None = None

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1]


def solve_parabolic(
    spec: EquationSpec, u0: GridFunction, T: float, dt: float, snapshots: int = 10
) -> Trajectory:
    """Explicit Euler for u_t + F(u) = f on [0, T].

    The step is shortened so that a whole number of steps reaches T.
    """
    if T <= 0.0 or dt <= 0.0 or snapshots < 1:
        raise InvalidInputError("need T > 0, dt > 0 and at least one snapshot")
    limit = cfl_dt(spec, u0)
    if dt > limit:
        raise InvalidInputError(f"dt = {dt:.3e} exceeds the CFL bound {limit:.3e}")
    steps = max(1, math.ceil(T / dt - 1e-12))
    dt = T / steps
    sample_at = set(np.unique(np.linspace(0, steps, snapshots + 1).round().astype(int)).tolist())
    f_norm = spec.forcing_norm()
    lower, upper = float(np.min(u0.values)), float(np.max(u0.values))
    heat = spec.heat_type
    ok = True if heat else None

    u = u0
    times, frames, record = [0.0], [u0], [(0, residual(spec, u0).sup_norm(), dt)]
    for step in range(1, steps + 1):
        r = residual(spec, u)
        values = u.values - dt * r.values
        t = step * dt
        bound = 10.0 * (max(abs(lower), abs(upper)) + t * f_norm + 1.0)
        if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > bound:
            log.warning("Time marching blew up", equation=spec.name, step=step, time=t)
            raise InstabilityError(f"{spec.name}: ‖u‖∞ left the a priori bound at t = {t:.4g}")
        u = u.with_values(values)
        if heat:
            slack = 1e-9 * (1.0 + abs(lower) + abs(upper))
            within = lower - t * f_norm - slack <= np.min(values) and np.max(values) <= upper + t * f_norm + slack
            ok = ok and bool(within)
        if step in sample_at:
            times.append(t)
            frames.append(u)
            record.append((step, r.sup_norm(), dt))
    if ok is False:
        log.warning("Maximum principle violated", equation=spec.name)
    return Trajectory(np.array(times), frames, record, ok)


def gradient_cutoff(spec: EquationSpec, R: float) -> EquationSpec:
    """Clamp |Du| at R inside every gradient-power term; R = 0 drops them."""
    if R < 0.0 or math.isnan(R):
        raise InvalidInputError(f"cutoff must be nonnegative, got {R}")
    if math.isinf(R):
        return spec

    def clamp(terms):
        kept = []
        for term in terms:
            if isinstance(term, GradientPower):
                if R == 0.0:
                    continue
                term = dataclasses.replace(term, cutoff=min(term.cutoff, R))
            kept.append(term)
        return tuple(kept)

    controls = tuple(
        tuple(dataclasses.replace(variant, terms=clamp(variant.terms)) for variant in row)
        for row in spec.controls
    )
    return spec.with_terms(clamp(spec.terms), controls)


def comparison_bound(spec: EquationSpec) -> float:
    """‖u‖∞ <= M / c for specs with a positive zeroth-order term."""
    c = spec.zeroth_order
    if c <= 0.0:
        raise InvalidInputError("the comparison bound needs a positive zeroth-order term")
    return spec.forcing_norm() / c


def _cos_product(coords: np.ndarray) -> np.ndarray:
    return np.prod(np.cos(2 * np.pi * coords), axis=0)


def toy_model(n: int, beta: float = 1.0, forcing: Coefficient = _cos_product, c: float = 0.0) -> EquationSpec:
    """-Δ_{x1} u + (-Δ_{x2})^{β/2} u (+ c u) = f with d1 = d2 = 1."""
    terms: list[Term] = [LocalTrace(block=1), Nonlocal(fractional_kernel(1, beta), block=2)]
    if c:
        terms.append(ZerothOrder(c))
    return EquationSpec(Geometry(1, 1, n), tuple(terms), forcing, name=f"toy-b{beta:g}")


def model_equation(
    n: int,
    d: int = 1,
    *,
    beta: float = 1.5,
    matrix: np.ndarray | None = None,
    kernel_coefficient: Coefficient = 1.0,
    b: Coefficient = 1.0,
    k: float = 1.0,
    r: float = 1.0,
    c: float = 1.0,
    forcing: Coefficient = _cos_product,
) -> EquationSpec:
    """-tr(A D²u) - c(x)I[x,u] + b(x)|Du|^k + |Du|^r + c u = f."""
    terms: list[Term] = []
    if matrix is not None:
        terms.append(LocalTrace(matrix=np.asarray(matrix, dtype=float)))
    terms += [
        Nonlocal(fractional_kernel(d, beta), kernel_coefficient),
        GradientPower(b, k),
        GradientPower(1.0, r),
        ZerothOrder(c),
    ]
    return EquationSpec(Geometry(d, 0, n), tuple(terms), forcing, name=f"model-b{beta:g}-k{k:g}")


def _sine_drift(coords: np.ndarray) -> np.ndarray:
    return np.sin(2 * np.pi * coords[0])


def _cosine(coords: np.ndarray) -> np.ndarray:
    return np.cos(2 * np.pi * coords[0])


def advection_fractional(
    n: int,
    beta: float = 1.5,
    drift: Coefficient = _sine_drift,
    forcing: Coefficient = _cosine,
    c: float = 1.0,
) -> EquationSpec:
    """(-Δ)^{β/2} u + b(x)·Du + c u = f in one dimension."""
    terms: list[Term] = [Nonlocal(fractional_kernel(1, beta)), Drift((drift,))]
    if c:
        terms.append(ZerothOrder(c))
    return EquationSpec(Geometry(1, 0, n), tuple(terms), forcing, name=f"advection-b{beta:g}")


def fractional_heat(n: int, beta: float = 1.0, d: int = 1, forcing: Coefficient = 0.0) -> EquationSpec:
    return EquationSpec(
        Geometry(d, 0, n), (Nonlocal(fractional_kernel(d, beta)),), forcing, name=f"fractional-heat-b{beta:g}"
    )


def mixed_equation(
    n: int,
    *,
    beta: float = 1.5,
    a1: Coefficient = 1.0,
    a2: Coefficient = 1.0,
    b1: Coefficient = 0.5,
    k1: float = 1.0,
    b2: Coefficient = 0.5,
    k2: float = 1.0,
    r: float = 0.0,
    c: float = 1.0,
    forcing: Coefficient = _cos_product,
) -> EquationSpec:
    """-a1 Δ_{x1}u - a2 I_{x2}[x,u] + b1|D_{x1}u|^k1 + b2|D_{x2}u|^k2 (+ |Du|^r) + c u = f."""
    terms: list[Term] = [
        LocalTrace(a1, block=1),
        Nonlocal(fractional_kernel(1, beta), a2, block=2),
        GradientPower(b1, k1, block=1),
        GradientPower(b2, k2, block=2),
    ]
    if r:
        terms.append(GradientPower(1.0, r))
    terms.append(ZerothOrder(c))
    geometry = Geometry(1, 1, n)
    floor = float(np.min(field_values(a1, geometry) + field_values(a2, geometry)))
    profile = EllipticityProfile(Lambda1=a1, Lambda2=a2, Lambda0=floor, k=max(k1, k2))
    return EquationSpec(geometry, tuple(terms), forcing, profile=profile, name=f"mixed-b{beta:g}")


def isaacs_diffusion_control(
    n: int,
    diffusions: tuple[float, ...] = (1.0, 2.0),
    c: float = 1.0,
    forcing: Coefficient = _cos_product,
    d: int = 1,
) -> EquationSpec:
    """c u + sup_γ(-a_γ Δu) = f; the inf family is a single variant."""
    controls = tuple((ControlVariant((LocalTrace(a),)),) for a in diffusions)
    return EquationSpec(
        Geometry(d, 0, n), (ZerothOrder(c),), forcing, controls=controls, name="isaacs-diffusion"
    )
