"""Both sides of the concave, Lipschitz, Hölder and quadratic estimates."""

import dataclasses
import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from mide_lab.errors import InvalidInputError
from mide_lab.grid import Block, Geometry, GridFunction
from mide_lab.levy import (
    ConeSpec,
    JumpFunction,
    LevyKernel,
    cone_mass,
    difference_weight,
    first_moment_scale,
    integrate,
    jump_cone_mass,
    measure_constants,
    squared_norm,
    tail_mass,
)
from mide_lab.logs import log
from mide_lab.operators import (
    DEFAULT_OPERATOR_SETTINGS,
    OperatorSettings,
    SplitSpec,
    eval_levy_ito,
    eval_nonlocal,
)
from mide_lab.quadrature import DEFAULT_SETTINGS, QuadratureSettings, Region, angular_rule

# symmetric sample of s in [-1, 1] for the sup inside cone integrands
S_GRID = np.linspace(-1.0, 1.0, 33)
SIDES_TOL = 1e-6


class PhiFamily(StrEnum):
    HOLDER = "holder"
    LIPSCHITZ = "lipschitz-regularized"


@dataclass(frozen=True)
class TestFunctionPhi:
    """Radial test function of the doubling argument, constant beyond t0.

    holder: φ(t) = L·t^α.
    lipschitz-regularized: φ(t) = L(t - ρ·t^(1+α)) with t0 = (ρ(1+α))^(-1/α).
    """

    __test__ = False

    family: PhiFamily
    L: float
    alpha: float
    rho: float | None = None
    t0: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "family", PhiFamily(self.family))
        if self.L <= 0.0:
            raise InvalidInputError(f"L must be positive, got {self.L}")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1], got {self.alpha}")
        match self.family:
            case PhiFamily.HOLDER:
                if self.t0 <= 0.0:
                    raise InvalidInputError(f"t0 must be positive, got {self.t0}")
            case PhiFamily.LIPSCHITZ:
                if self.rho is None or self.rho <= 0.0:
                    raise InvalidInputError("the lipschitz-regularized family needs rho > 0")
                if self.rho * self.alpha * 2 ** (self.alpha - 1) <= 1.0:
                    raise InvalidInputError(
                        f"rho·alpha·2^(alpha-1) must exceed 1, got "
                        f"{self.rho * self.alpha * 2 ** (self.alpha - 1):.6f}"
                    )
                t0 = (self.rho * (1.0 + self.alpha)) ** (-1.0 / self.alpha)
                object.__setattr__(self, "t0", t0)

    @classmethod
    def holder(cls, L: float, alpha: float, t0: float = math.inf) -> "TestFunctionPhi":
        return cls(PhiFamily.HOLDER, L, alpha, t0=t0)

    @classmethod
    def lipschitz(cls, L: float, alpha: float, rho: float) -> "TestFunctionPhi":
        return cls(PhiFamily.LIPSCHITZ, L, alpha, rho=rho)

    def with_L(self, L: float) -> "TestFunctionPhi":
        return dataclasses.replace(self, L=L)

    def value(self, t) -> np.ndarray:
        t = np.minimum(np.asarray(t, dtype=float), self.t0)
        if self.family is PhiFamily.HOLDER:
            return self.L * t**self.alpha
        return self.L * (t - self.rho * t ** (1.0 + self.alpha))

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            if self.family is PhiFamily.HOLDER:
                inside = self.L * self.alpha * t ** (self.alpha - 1.0)
            else:
                inside = self.L * (1.0 - self.rho * (1.0 + self.alpha) * t**self.alpha)
        return np.where(t < self.t0, inside, 0.0)

    def second_derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family is PhiFamily.HOLDER:
                inside = self.L * a * (a - 1.0) * t ** (a - 2.0)
            else:
                inside = -self.L * self.rho * (1.0 + a) * a * t ** (a - 1.0)
        return np.where(t < self.t0, inside, 0.0)

    def check_shape(self, samples: int = 1000) -> bool:
        """φ' > 0 and φ'' <= 0 on an open sample of (0, t0)."""
        upper = self.t0 if math.isfinite(self.t0) else 1.0
        t = upper * (np.arange(samples) + 0.5) / samples
        return bool(np.all(self.derivative(t) > 0.0) and np.all(self.second_derivative(t) <= 0.0))

    def describe(self) -> dict:
        return {
            "family": str(self.family),
            "L": self.L,
            "alpha": self.alpha,
            "rho": self.rho if self.rho is not None else float("nan"),
            "t0": self.t0,
        }


@dataclass(frozen=True, eq=False)
class DoublingGeometry:
    a: np.ndarray
    eta: float
    delta0: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if np.linalg.norm(a) == 0.0:
            raise InvalidInputError("the doubling separation a must be nonzero")
        if not 0.0 < self.eta < 1.0 or not 0.0 < self.delta0 < 1.0:
            raise InvalidInputError(f"eta and delta0 must lie in (0, 1), got ({self.eta}, {self.delta0})")
        if 1.0 - self.eta - self.delta0 <= 0.0:
            raise InvalidInputError("need eta + delta0 < 1")
        object.__setattr__(self, "a", a)

    @property
    def norm_a(self) -> float:
        return float(np.linalg.norm(self.a))

    @property
    def a_hat(self) -> np.ndarray:
        return self.a / self.norm_a

    @property
    def eta_tilde(self) -> float:
        return (1.0 - self.eta - self.delta0) / (1.0 + self.delta0)

    @property
    def delta(self) -> float:
        return self.norm_a * self.delta0

    def cone(self) -> ConeSpec:
        return ConeSpec(self.a, self.eta, self.delta)


def lipschitz_geometry(a: np.ndarray, alpha: float, eta_tilde0: float) -> DoublingGeometry:
    """Geometry shrinking with |a|: δ0 = |a|^α η̃0/2, η = |a|^(2α) η̃0²/2."""
    if not 0.0 < eta_tilde0 < 0.25:
        raise InvalidInputError(f"eta_tilde0 must lie in (0, 1/4), got {eta_tilde0}")
    norm_a = float(np.linalg.norm(a))
    return DoublingGeometry(
        a,
        eta=norm_a ** (2 * alpha) * eta_tilde0**2 / 2.0,
        delta0=norm_a**alpha * eta_tilde0 / 2.0,
    )


@dataclass(frozen=True, eq=False)
class MaxPoint:
    """A lattice maximizer of a doubling function.

    `a` is the minimal-image displacement x - y.
    """

    geometry: Geometry
    x_index: tuple[int, ...]
    y_index: tuple[int, ...]
    a: np.ndarray
    value: float
    penalization_gap: float = 0.0
    block: Block = "full"

    @property
    def x(self) -> np.ndarray:
        return self.geometry.point(self.x_index)

    @property
    def y(self) -> np.ndarray:
        return self.geometry.point(self.y_index)

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.a[list(self.geometry.axes(self.block))]))

    @property
    def degenerate(self) -> bool:
        return self.value <= 0.0 or self.separation == 0.0


@dataclass(frozen=True, eq=False)
class ShiftTable:
    """Δ_s = max_x u(x) - v(x - s) for every lattice shift s with components
    in [-n/2, n/2)."""

    geometry: Geometry
    shifts: np.ndarray
    maxima: np.ndarray
    argmax: np.ndarray

    def distances(self, axes: tuple[int, ...] | None = None) -> np.ndarray:
        shifts = self.shifts if axes is None else self.shifts[:, list(axes)]
        return np.linalg.norm(shifts, axis=1) * self.geometry.h

    def max_point(self, k: int, value: float, gap: float = 0.0, block: Block = "full") -> MaxPoint:
        g = self.geometry
        x_index = tuple(int(i) for i in np.unravel_index(int(self.argmax[k]), g.shape))
        y_index = tuple(int(i) for i in (np.asarray(x_index) - self.shifts[k]) % g.n)
        return MaxPoint(g, x_index, y_index, self.shifts[k] * g.h, float(value), float(gap), block)


def shift_table(u: GridFunction, v: GridFunction, block: Block = "full") -> ShiftTable:
    """Enumerate shifts moving only the coordinates of `block`."""
    g = u.geometry
    if v.geometry != g:
        raise InvalidInputError(f"geometry mismatch: {g} vs {v.geometry}")
    moving = set(g.axes(block))
    ranges = [range(-(g.n // 2), g.n - g.n // 2) if i in moving else [0] for i in range(g.d)]
    all_axes = tuple(range(g.d))
    shifts, maxima, argmax = [], [], []
    for shift in itertools.product(*ranges):
        difference = u.values - np.roll(v.values, shift, axis=all_axes)
        k = int(np.argmax(difference))
        shifts.append(shift)
        maxima.append(difference.flat[k])
        argmax.append(k)
    return ShiftTable(g, np.array(shifts, dtype=int), np.array(maxima), np.array(argmax))


def locate_max(u: GridFunction, v: GridFunction, phi: TestFunctionPhi) -> MaxPoint:
    """Exhaustive lattice maximum of u(x) - v(y) - φ(|x - y|) in the torus metric."""
    table = shift_table(u, v)
    scores = table.maxima - phi.value(table.distances())
    k = int(np.argmax(scores))
    point = table.max_point(k, scores[k])
    if point.degenerate:
        log.debug("Doubling maximum is degenerate", value=point.value, separation=point.separation)
    return point


def partial_locate_max(u: GridFunction, which: Block, phi: TestFunctionPhi, eps: float) -> MaxPoint:
    """Maximum of u(x) - u(y) - φ(|x_w - y_w|) - |x_o - y_o|²/ε² with w the
    selected block and o the other one."""
    if which not in (1, 2):
        raise InvalidInputError(f"which must be 1 or 2, got {which!r}")
    if eps <= 0.0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    g = u.geometry
    other = 2 if which == 1 else 1
    table = shift_table(u, u)
    gap = table.distances(g.axes(other)) ** 2 / eps**2
    scores = table.maxima - phi.value(table.distances(g.axes(which))) - gap
    k = int(np.argmax(scores))
    return table.max_point(k, scores[k], gap[k], which)


def locate_quadratic_max(u: GridFunction, eps: float) -> MaxPoint:
    """Maximum of u(x) - u(y) - |x - y|²/ε²."""
    if eps <= 0.0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    table = shift_table(u, u)
    scores = table.maxima - table.distances() ** 2 / eps**2
    k = int(np.argmax(scores))
    return table.max_point(k, scores[k])


@dataclass(frozen=True)
class EstimateSides:
    lhs: float
    rhs: float
    terms: dict[str, float] = field(default_factory=dict)
    s_grid_size: int = len(S_GRID)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + SIDES_TOL * (1.0 + abs(self.rhs))

    def to_record(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "status": "PASS" if self.holds else "FAIL"}


def _bound_settings(settings: QuadratureSettings) -> QuadratureSettings:
    # sup over a finite s-grid is only piecewise smooth in z
    return dataclasses.replace(settings, angular=4 * settings.angular, enforce=False)


def _c_tilde(
    kernel: LevyKernel,
    points: list[np.ndarray],
    settings: QuadratureSettings,
    jump: JumpFunction | None = None,
) -> float:
    """max over the points of ∫_B |j|² μ_x + μ_x(B^c)."""
    values = []
    for x in points:
        if jump is None:
            integrand = squared_norm
        else:
            integrand = lambda z, x=x: squared_norm(jump(x, z))  # noqa: E731
        inner = integrate(kernel, x, integrand, r_outer=1.0, settings=settings, what="C̃ ball").value
        values.append(inner + tail_mass(kernel, x, 1.0, settings))
    return max(values)


def _require_nondegenerate(maxpoint: MaxPoint, geom: DoublingGeometry):
    if maxpoint.degenerate:
        raise InvalidInputError(
            f"estimates need a positive maximum with x̄ ≠ ȳ, got M={maxpoint.value:.3e}"
        )
    if not np.allclose(geom.a, maxpoint.a, atol=1e-12):
        raise InvalidInputError("geometry separation does not match the maximum point")


def _cone_factor(phi: TestFunctionPhi, eta_tilde: float, t: np.ndarray) -> np.ndarray:
    e2 = eta_tilde**2
    return (1.0 - e2) * phi.derivative(t) / t + e2 * phi.second_derivative(t)


def _sup_over_s(a: np.ndarray, displacement: np.ndarray, profile: Callable) -> np.ndarray:
    """sup over the s-grid of profile(|a + s·displacement|), per row."""
    shifted = a[None, None, :] + S_GRID[:, None, None] * displacement[None, :, :]
    return profile(np.linalg.norm(shifted, axis=-1)).max(axis=0)


def concave_estimate_sides(
    kernel: LevyKernel,
    u: GridFunction,
    v: GridFunction,
    phi: TestFunctionPhi,
    geom: DoublingGeometry,
    maxpoint: MaxPoint,
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> EstimateSides:
    """Direct I[x̄,p,u] - I[ȳ,p,v] against the four-term concave bound."""
    _require_nondegenerate(maxpoint, geom)
    if kernel.dim != u.geometry.d:
        raise InvalidInputError(f"kernel dimension {kernel.dim} differs from grid dimension {u.geometry.d}")
    x_bar, y_bar = maxpoint.x, maxpoint.y
    a, delta = geom.a, geom.delta
    p = float(phi.derivative(geom.norm_a)) * geom.a_hat
    split = SplitSpec(delta, p)
    lhs = eval_nonlocal(kernel, u, x_bar, split, settings=settings) - eval_nonlocal(
        kernel, v, y_bar, split, settings=settings
    )

    quad = _bound_settings(settings.quadrature)
    c_tilde = _c_tilde(kernel, [x_bar, y_bar], settings.quadrature)
    terms = {"norm": 4.0 * c_tilde * max(u.sup_norm(), v.sup_norm())}

    def cone_integrand(z):
        return _sup_over_s(a, z, lambda t: _cone_factor(phi, geom.eta_tilde, t)) * squared_norm(z)

    terms["cone"] = 0.5 * sum(
        integrate(
            kernel, x, cone_integrand, r_outer=delta, region=Region.CONE,
            axis=a, eta=geom.eta, settings=quad, what="cone term",
        ).value
        for x in (x_bar, y_bar)
    )
    terms["far_difference"] = 0.0
    terms["near_difference"] = 0.0
    if kernel.x_dependent:
        weight = difference_weight(kernel, x_bar, y_bar)
        terms["far_difference"] = 2.0 * float(phi.derivative(geom.norm_a)) * integrate(
            kernel, x_bar, lambda z: np.sqrt(squared_norm(z)), r_inner=delta, r_outer=1.0,
            weight=weight, settings=quad, what="far difference term",
        ).value

        def near_integrand(z):
            return _sup_over_s(a, z, lambda t: phi.derivative(t) / t) * squared_norm(z)

        terms["near_difference"] = integrate(
            kernel, x_bar, near_integrand, r_outer=delta, region=Region.CONE_COMPLEMENT,
            axis=a, eta=geom.eta, weight=weight, settings=quad, what="near difference term",
        ).value

    sides = EstimateSides(lhs, sum(terms.values()), terms)
    if not sides.holds:
        log.warning("Concave estimate violated", lhs=lhs, rhs=sides.rhs, kernel=kernel.name)
    return sides


@dataclass(frozen=True)
class BoundReport:
    """-L·|a|^exponent·(leading - o_term) + O_term and its ingredients."""

    value: float
    leading: float
    o_term: float
    O_term: float
    exponent: float
    threshold: float
    constants: dict[str, float] = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value

    @property
    def dominant(self) -> float:
        return self.value - self.O_term


def _cone_constant(
    kernel: LevyKernel,
    geom: DoublingGeometry,
    points: list[np.ndarray],
    settings: QuadratureSettings,
    jump: JumpFunction | None,
) -> float:
    """min over the points of cone mass / (η^((d-1)/2) δ^(2-β)) at the geometry's scale."""
    d, beta = kernel.dim, kernel.beta
    normalizer = geom.eta ** ((d - 1) / 2) * geom.delta ** (2.0 - beta)
    masses = []
    for x in points:
        if jump is None:
            masses.append(cone_mass(kernel, geom.cone(), x, settings).value)
        else:
            masses.append(jump_cone_mass(jump, kernel, x, geom.a, geom.eta, geom.delta, settings))
    return min(masses) / normalizer


def _holder_constant(kernel: LevyKernel, constants: dict | None) -> float:
    if not kernel.x_dependent:
        return 0.0
    if constants is not None and "C_mu3" in constants:
        return constants["C_mu3"]
    return measure_constants(kernel).c_holder


def _negativity_threshold(L: float, exponent: float, leading: float, o_term, O_term: float) -> float:
    """Largest |a| <= 1/2 where -L|a|^exponent(leading - o(|a|)) + O < 0, on a
    geometric scan refined by bisection; 0 when none is found."""

    def f(r: float) -> float:
        return -L * r**exponent * (leading - o_term(r)) + O_term

    radii = 0.5 * 2.0 ** -np.arange(60)
    negative = [r for r in radii if f(r) < 0.0]
    if not negative:
        return 0.0
    lo = max(negative)
    if lo == radii[0]:
        return float(lo)
    hi = 2.0 * lo
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        lo, hi = (mid, hi) if f(mid) < 0.0 else (lo, mid)
    return float(lo)


def holder_bound(
    kernel: LevyKernel,
    phi: TestFunctionPhi,
    a: np.ndarray,
    geom: DoublingGeometry,
    *,
    norms: tuple[float, float] = (1.0, 1.0),
    points: tuple[np.ndarray, np.ndarray] | None = None,
    jump: JumpFunction | None = None,
    constants: dict | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> BoundReport:
    """-L|a|^(α-β)(α·C(μ) - o) + 4C̃·max‖·‖ assembled from measured constants.

    C(μ) = ((2-α)η̃² - 1)(1+δ0)^(α-2)·C_μ·η^((d-1)/2)·δ0^(2-β) where C_μ is the
    cone ratio measured at δ = |a|δ0.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    alpha, beta, d = phi.alpha, kernel.beta, kernel.dim
    if phi.family is not PhiFamily.HOLDER:
        raise InvalidInputError("holder_bound needs the holder family")
    if not alpha < min(beta, 1.0):
        raise InvalidInputError(f"need alpha < min(beta, 1), got alpha={alpha}, beta={beta}")
    if not np.allclose(geom.a, a):
        raise InvalidInputError("geometry separation does not match a")
    eta_t = geom.eta_tilde
    if (2.0 - alpha) * eta_t**2 <= 1.0:
        raise InvalidInputError(f"need (2-alpha)·eta_tilde² > 1, got {(2.0 - alpha) * eta_t**2:.6f}")
    if geom.delta0 >= 0.5:
        raise InvalidInputError(f"need delta0 < 1/2, got {geom.delta0}")
    if not math.isfinite(phi.t0):
        raise InvalidInputError("holder_bound needs a finite t0")
    floor = sum(norms) / phi.t0**alpha
    if phi.L <= floor:
        raise InvalidInputError(f"L={phi.L} must exceed (‖u‖+‖v‖)/t0^alpha = {floor:.6g}")
    gamma = kernel.holder_gamma or 1.0
    if jump is not None:
        gamma = jump.gamma
        if beta <= 2.0 * (1.0 - gamma):
            raise InvalidInputError(f"need beta > 2(1-gamma), got beta={beta}, gamma={gamma}")

    norm_a, delta0 = geom.norm_a, geom.delta0
    pts = [a, np.zeros_like(a)] if points is None else [np.asarray(p, dtype=float) for p in points]
    c_cone = _cone_constant(kernel, geom, pts, settings, jump)
    c_mu = (
        ((2.0 - alpha) * eta_t**2 - 1.0)
        * (1.0 + delta0) ** (alpha - 2.0)
        * c_cone
        * geom.eta ** ((d - 1) / 2)
        * delta0 ** (2.0 - beta)
    )
    c3 = _holder_constant(kernel, constants)

    def o_term(r: float) -> float:
        if c3 == 0.0:
            return 0.0
        ring = 2.0 * first_moment_scale(r * delta0, beta) / r ** (1.0 - beta)
        core = (1.0 - delta0) ** (alpha - 2.0) * delta0 ** (2.0 - beta)
        return alpha * c3 * r**gamma * (ring + core)

    c_tilde = _c_tilde(kernel, pts, settings, jump)
    big_o = 4.0 * c_tilde * max(norms)
    exponent = alpha - beta
    leading = alpha * c_mu
    value = -phi.L * norm_a**exponent * (leading - o_term(norm_a)) + big_o
    report = BoundReport(
        value=value,
        leading=leading,
        o_term=o_term(norm_a),
        O_term=big_o,
        exponent=exponent,
        threshold=_negativity_threshold(phi.L, exponent, leading, o_term, big_o),
        constants={"C_mu": c_mu, "C_cone": c_cone, "C_mu3": c3, "C_tilde": c_tilde},
    )
    log.debug("Hölder bound assembled", value=value, norm_a=norm_a, C_mu=c_mu)
    return report


def lipschitz_bound(
    kernel: LevyKernel,
    phi: TestFunctionPhi,
    a: np.ndarray,
    geom: DoublingGeometry,
    *,
    norms: tuple[float, float] = (1.0, 1.0),
    points: tuple[np.ndarray, np.ndarray] | None = None,
    jump: JumpFunction | None = None,
    constants: dict | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> BoundReport:
    """-L|a|^((1-β)+α(d+2-β))(Θ - o) + 4C̃·max‖·‖ with Θ = C(μ)(ρα2^(α-1) - 1).

    The geometry must follow `lipschitz_geometry`.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    alpha, beta, d = phi.alpha, kernel.beta, kernel.dim
    if phi.family is not PhiFamily.LIPSCHITZ:
        raise InvalidInputError("lipschitz_bound needs the lipschitz-regularized family")
    if beta <= 1.0:
        raise InvalidInputError(f"lipschitz_bound needs beta > 1, got {beta}")
    if jump is None:
        gamma = kernel.holder_gamma or 1.0
        alpha_max = min(gamma / (d + 1), (beta - 1.0) / (d + 2.0 - beta))
    else:
        gamma = jump.gamma
        if 1.0 < 2.0 * (1.0 - gamma):
            raise InvalidInputError(f"need 1 >= 2(1-gamma), got gamma={gamma}")
        alpha_max = min(gamma * beta / (d + 1), (beta - 1.0) / (d + 2.0 - beta))
    if not alpha < alpha_max:
        raise InvalidInputError(f"need alpha < {alpha_max:.6g}, got {alpha}")
    if not np.allclose(geom.a, a):
        raise InvalidInputError("geometry separation does not match a")
    norm_a = geom.norm_a
    eta0 = 2.0 * geom.delta0 / norm_a**alpha
    if not math.isclose(geom.eta, norm_a ** (2 * alpha) * eta0**2 / 2.0, rel_tol=1e-9):
        raise InvalidInputError("geometry does not follow the Lipschitz schedule")
    if not eta0 < 0.25:
        raise InvalidInputError(f"need eta_tilde0 < 1/4, got {eta0}")
    floor = sum(norms) * (alpha + 1.0) / (phi.t0 * alpha)
    if phi.L <= floor:
        raise InvalidInputError(f"L={phi.L} must exceed (‖u‖+‖v‖)(α+1)/(t0·α) = {floor:.6g}")

    pts = [a, np.zeros_like(a)] if points is None else [np.asarray(p, dtype=float) for p in points]
    c_cone = _cone_constant(kernel, geom, pts, settings, jump)
    excess = phi.rho * alpha * 2 ** (alpha - 1.0) - 1.0
    theta = c_cone * excess * (eta0**2 / 2.0) ** ((d - 1) / 2) * (eta0 / 2.0) ** (2.0 - beta)
    if theta <= 0.0:
        raise InvalidInputError(f"Theta must be positive, got {theta}")
    c3 = _holder_constant(kernel, constants)

    def o_term(r: float) -> float:
        if c3 == 0.0:
            return 0.0
        delta0 = r**alpha * eta0 / 2.0
        return 2.0 * c3 * (eta0 / 2.0) ** (1.0 - beta) * r ** (gamma - alpha * (d + 1)) + c3 * (
            eta0 / 2.0
        ) ** (2.0 - beta) / (1.0 - delta0) * r ** (gamma - alpha * d)

    c_tilde = _c_tilde(kernel, pts, settings, jump)
    big_o = 4.0 * c_tilde * max(norms)
    exponent = (1.0 - beta) + alpha * (d + 2.0 - beta)
    value = -phi.L * norm_a**exponent * (theta - o_term(norm_a)) + big_o
    return BoundReport(
        value=value,
        leading=theta,
        o_term=o_term(norm_a),
        O_term=big_o,
        exponent=exponent,
        threshold=_negativity_threshold(phi.L, exponent, theta, o_term, big_o),
        constants={"C_cone": c_cone, "C_mu3": c3, "C_tilde": c_tilde, "eta_tilde0": eta0},
    )


@dataclass(frozen=True)
class LevyItoSides(EstimateSides):
    cone_samples: int = 0
    cone_violations: int = 0


def _middle_cone_predicate(jump: JumpFunction, m: np.ndarray, a_hat: np.ndarray, eta: float, delta: float):
    def inside(z):
        j = jump(m, z)
        norm = np.sqrt(squared_norm(j))
        return (norm <= delta / 2.0) & (np.abs(j @ a_hat) >= (1.0 - eta / 2.0) * norm)

    return inside


def _cone_inclusion_violations(
    jump: JumpFunction, geom: DoublingGeometry, m: np.ndarray, x_bar: np.ndarray, y_bar: np.ndarray
) -> tuple[int, int]:
    """Sampled z in the middle cone lying outside C_{η,δ}(x̄) or C_{η,δ}(ȳ)."""
    dirs, _ = angular_rule(jump.dim, 64)
    radii = np.linspace(0.0, geom.delta / (2.0 * jump.c0), 33)[1:]
    z = np.concatenate([r * dirs for r in radii])
    inside = _middle_cone_predicate(jump, m, geom.a_hat, geom.eta, geom.delta)
    z = z[inside(z)]
    violations = 0
    for x in (x_bar, y_bar):
        j = jump(x, z)
        norm = np.sqrt(squared_norm(j))
        ok = (norm <= geom.delta) & (np.abs(j @ geom.a_hat) >= (1.0 - geom.eta) * norm - 1e-12)
        violations += int(np.sum(~ok))
    return len(z), violations


def levy_ito_concave_sides(
    jump: JumpFunction,
    kernel: LevyKernel,
    u: GridFunction,
    v: GridFunction,
    phi: TestFunctionPhi,
    geom: DoublingGeometry,
    maxpoint: MaxPoint,
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> LevyItoSides:
    """Direct J[x̄,p,u] - J[ȳ,p,v] against the Lévy–Itô concave bound.

    The cone is centred at the midpoint m = x̄ - a/2; Δ(z) = j(x̄,z) - j(ȳ,z).
    Jumps declaring a scale get exact cone and ring regions, other jumps are
    integrated over the ball against indicator functions.
    """
    _require_nondegenerate(maxpoint, geom)
    if jump.dim != kernel.dim or kernel.dim != u.geometry.d:
        raise InvalidInputError("jump, kernel and grid dimensions must agree")
    x_bar, y_bar = maxpoint.x, maxpoint.y
    a, delta, eta = geom.a, geom.delta, geom.eta
    gamma = jump.gamma
    if (geom.norm_a / 2.0) ** gamma > jump.c0 / jump.C0 * eta / (4.0 - eta):
        raise InvalidInputError(
            "(|a|/2)^gamma exceeds (c0/C0)·eta/(4-eta); the middle cone is not inside both cones"
        )
    m = x_bar - a / 2.0
    p = float(phi.derivative(geom.norm_a)) * geom.a_hat
    split = SplitSpec(delta, p)
    lhs = eval_levy_ito(jump, kernel, u, x_bar, split, settings) - eval_levy_ito(
        jump, kernel, v, y_bar, split, settings
    )

    quad = _bound_settings(settings.quadrature)
    c_tilde = _c_tilde(kernel, [x_bar, y_bar], settings.quadrature, jump)
    terms = {"norm": 4.0 * c_tilde * max(u.sup_norm(), v.sup_norm())}

    def cone_values(z):
        best = np.full(len(z), -np.inf)
        for x in (x_bar, y_bar):
            j = jump(x, z)
            sup = _sup_over_s(a, j, lambda t: _cone_factor(phi, geom.eta_tilde, t))
            best = np.maximum(best, sup * squared_norm(j))
        return best

    def delta_of(z):
        return jump(x_bar, z) - jump(y_bar, z)

    def far_values(z):
        return np.sqrt(squared_norm(delta_of(z)))

    def near_values(z):
        dz = delta_of(z)
        return _sup_over_s(a, dz, lambda t: phi.derivative(t) / t) * squared_norm(dz)

    if jump.scale is not None:
        s_mid = abs(jump.scale(m))
        r_cone = min(delta / (2.0 * s_mid), 1.0)
        ds = abs(jump.scale(x_bar) - jump.scale(y_bar))
        r_split = delta / ds if ds > 0.0 else math.inf
        terms["cone"] = 0.5 * integrate(
            kernel, m, cone_values, r_outer=r_cone, region=Region.CONE,
            axis=a, eta=eta / 2.0, settings=quad, what="Lévy–Itô cone term",
        ).value
        terms["far_difference"] = 0.0
        terms["near_difference"] = 0.0
        if ds > 0.0:
            pieces = [
                (0.0, r_cone, Region.CONE_COMPLEMENT),
                (r_cone, 1.0, Region.BALL),
            ]
            for r_inner, r_outer, region in pieces:
                if r_outer <= r_inner:
                    continue
                kwargs = dict(region=region, axis=a, eta=eta / 2.0) if region is not Region.BALL else {}
                near_outer = min(r_outer, r_split)
                if near_outer > r_inner:
                    terms["near_difference"] += integrate(
                        kernel, m, near_values, r_inner=r_inner, r_outer=near_outer,
                        settings=quad, what="Lévy–Itô near term", **kwargs,
                    ).value
                far_inner = max(r_inner, r_split)
                if r_outer > far_inner:
                    terms["far_difference"] += 2.0 * float(phi.derivative(geom.norm_a)) * integrate(
                        kernel, m, far_values, r_inner=far_inner, r_outer=r_outer,
                        settings=quad, what="Lévy–Itô far term", **kwargs,
                    ).value
    else:
        in_cone = _middle_cone_predicate(jump, m, geom.a_hat, eta, delta)
        r_cone = min(delta / (2.0 * jump.c0), 1.0)
        terms["cone"] = 0.5 * integrate(
            kernel, m, lambda z: np.where(in_cone(z), cone_values(z), 0.0),
            r_outer=r_cone, settings=quad, what="Lévy–Itô cone term",
        ).value

        def far_indicator(z):
            keep = ~in_cone(z) & (far_values(z) >= delta)
            return np.where(keep, far_values(z), 0.0)

        def near_indicator(z):
            keep = ~in_cone(z) & (far_values(z) <= delta)
            return np.where(keep, near_values(z), 0.0)

        terms["far_difference"] = 2.0 * float(phi.derivative(geom.norm_a)) * integrate(
            kernel, m, far_indicator, settings=quad, what="Lévy–Itô far term"
        ).value
        terms["near_difference"] = integrate(
            kernel, m, near_indicator, settings=quad, what="Lévy–Itô near term"
        ).value

    samples, violations = _cone_inclusion_violations(jump, geom, m, x_bar, y_bar)
    sides = LevyItoSides(lhs, sum(terms.values()), terms, cone_samples=samples, cone_violations=violations)
    if not sides.holds or violations:
        log.warning(
            "Lévy–Itô concave estimate violated",
            lhs=lhs,
            rhs=sides.rhs,
            cone_violations=violations,
            jump=jump.name,
        )
    return sides


def quadratic_bound(
    jump: JumpFunction,
    kernel: LevyKernel,
    eps: float,
    a: np.ndarray,
    delta: float,
    *,
    x: np.ndarray | None = None,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
) -> float:
    """2C0²ε⁻²∫_{B_δ}|z|²μ + C0²|a|^(2γ)ε⁻²C̃ + 2C0|a|^(γ+1)ε⁻²C̃."""
    if eps <= 0.0 or not 0.0 < delta <= 1.0:
        raise InvalidInputError(f"need eps > 0 and delta in (0, 1], got eps={eps}, delta={delta}")
    x = np.zeros(kernel.dim) if x is None else np.asarray(x, dtype=float)
    norm_a = float(np.linalg.norm(a))
    C0, gamma = jump.C0, jump.gamma
    inner = integrate(kernel, x, squared_norm, r_outer=delta, settings=settings, what="B_δ moment").value
    bound = 2.0 * C0**2 * inner / eps**2
    if norm_a > 0.0:
        c_tilde = _c_tilde(kernel, [x], settings)
        bound += C0**2 * norm_a ** (2 * gamma) * c_tilde / eps**2
        bound += 2.0 * C0 * norm_a ** (gamma + 1.0) * c_tilde / eps**2
    return bound


def quadratic_estimate_sides(
    jump: JumpFunction,
    kernel: LevyKernel,
    u: GridFunction,
    eps: float,
    delta: float,
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> EstimateSides:
    """J[x̄,p,u] - J[ȳ,p,u] with p = 2a/ε² at the quadratic doubling maximum."""
    maxpoint = locate_quadratic_max(u, eps)
    x_bar, y_bar, a = maxpoint.x, maxpoint.y, maxpoint.a
    split = SplitSpec(delta, 2.0 * a / eps**2)
    lhs = eval_levy_ito(jump, kernel, u, x_bar, split, settings) - eval_levy_ito(
        jump, kernel, u, y_bar, split, settings
    )
    rhs = quadratic_bound(jump, kernel, eps, a, delta, x=x_bar, settings=settings.quadrature)
    return EstimateSides(lhs, rhs, {"norm_a": float(np.linalg.norm(a)), "M": maxpoint.value})


@dataclass(frozen=True)
class SignReport:
    """Signs of the local-trace and nonlocal-cone expressions at a separation."""

    trace_value: float
    nonlocal_factor: float
    nonlocal_value: float
    local_active: bool
    nonlocal_active: bool
    trace_threshold: float
    nonlocal_threshold: float
    bisected_trace_ratio: float
    bisected_nonlocal_ratio: float
    in_certified_sector: bool

    @property
    def mechanism(self) -> str:
        match (self.local_active, self.nonlocal_active):
            case (True, True):
                return "both"
            case (True, False):
                return "local"
            case (False, True):
                return "nonlocal"
        return "none"


def sign_change_ratio(expression: Callable[[float], float], tol: float = 1e-9) -> float:
    """Bisection for q in [0, 1] where expression(q) turns negative; nan when it
    keeps one sign."""
    lo, hi = 0.0, 1.0
    if (expression(lo) < 0.0) == (expression(hi) < 0.0):
        return float("nan")
    negative_at_hi = expression(hi) < 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (expression(mid) < 0.0) == negative_at_hi:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def directional_sign_analysis(
    a1: np.ndarray, a2: np.ndarray, alpha: float, L: float, eta_tilde: float
) -> SignReport:
    """Local trace 4Lα|a|^(α-2)(1 + (α-2)|a1|²/|a|²) against the nonlocal
    cone factor 1 + η̃²(α-2)|a2|²/|a|²."""
    a1 = np.atleast_1d(np.asarray(a1, dtype=float))
    a2 = np.atleast_1d(np.asarray(a2, dtype=float))
    a = np.concatenate([a1, a2])
    norm_a = float(np.linalg.norm(a))
    if norm_a == 0.0:
        raise InvalidInputError("a must be nonzero")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    r1 = float(a1 @ a1) / norm_a**2
    r2 = float(a2 @ a2) / norm_a**2
    scale = L * alpha * norm_a ** (alpha - 2.0)
    trace_value = 4.0 * scale * (1.0 + (alpha - 2.0) * r1)
    nonlocal_factor = 1.0 + eta_tilde**2 * (alpha - 2.0) * r2
    nonlocal_threshold = 1.0 / (eta_tilde**2 * (2.0 - alpha)) if eta_tilde > 0.0 else math.inf

    trace_q = sign_change_ratio(lambda q: 1.0 + (alpha - 2.0) * q**2)
    nonlocal_q = sign_change_ratio(lambda q: 1.0 + eta_tilde**2 * (alpha - 2.0) * q**2)
    return SignReport(
        trace_value=trace_value,
        nonlocal_factor=nonlocal_factor,
        nonlocal_value=scale * nonlocal_factor,
        local_active=trace_value < 0.0,
        nonlocal_active=nonlocal_factor < 0.0,
        trace_threshold=1.0 / (2.0 - alpha),
        nonlocal_threshold=nonlocal_threshold,
        bisected_trace_ratio=trace_q**2,
        bisected_nonlocal_ratio=nonlocal_q**2,
        in_certified_sector=bool(np.max(np.abs(a)) / norm_a >= math.sqrt(1.0 / (2.0 - alpha))),
    )
