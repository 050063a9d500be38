"""Nonlocal, Lévy–Itô, directional and local operators on periodic grid functions.

The nonlocal operators return the integral I itself; the fractional Laplacian
of order beta is -I for the unnormalized kernel |z|^(-d-beta).
"""

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate as scipy_integrate
from scipy import special

from mide_lab.errors import InvalidInputError, QuadratureError
from mide_lab.grid import Block, GridFunction
from mide_lab.levy import JumpFunction, LevyKernel, integrate, tail_mass
from mide_lab.quadrature import QuadratureSettings


@dataclass(frozen=True, eq=False)
class SplitSpec:
    """Truncation radius of the I¹_δ / I²_δ split and an optional p for I²_δ."""

    delta: float
    gradient_override: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidInputError(f"split delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class OperatorSettings:
    """Discretization of the operator integrals.

    taylor_radius: radius of the inner ball where the integrand is replaced by
        its second-order Taylor term; defaults to the grid spacing h.
    far_radius: beyond it u(x+z) is replaced by the torus mean of u.
    cell_width: radial cell length in units of h outside the Taylor ball.
    interpolation_order: 1 for the multilinear interpolant, whose exact gradient
        then compensates the inner ring; 3 for cubic B-splines with the
        interpolated centered-difference gradient.
    """

    quadrature: QuadratureSettings = QuadratureSettings(rtol=1e-5, atol=1e-7)
    interpolation_order: int = 1
    taylor_radius: float | None = None
    far_radius: float = 8.0
    cell_width: float = 2.0
    max_angular: int = 2048


DEFAULT_OPERATOR_SETTINGS = OperatorSettings()


def _ring_settings(
    settings: OperatorSettings, kernel: LevyKernel, h: float, r_outer: float, scale: float
) -> QuadratureSettings:
    base = settings.quadrature
    cell = settings.cell_width * h
    angular = base.angular
    if kernel.integration_dim >= 2:
        per_circle = math.ceil(2 * math.pi * r_outer / cell)
        if kernel.integration_dim == 3:
            per_circle = math.ceil(per_circle / 2)
        angular = int(np.clip(per_circle, base.angular, settings.max_angular))
    return dataclasses.replace(base, angular=angular, max_cell=cell, atol=base.atol * scale)


def eval_nonlocal(
    kernel: LevyKernel,
    u: GridFunction,
    x: np.ndarray,
    split: SplitSpec,
    *,
    jump: JumpFunction | None = None,
    block: Block = "full",
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> float:
    """I¹_δ[x,u] + I²_δ[x,p,u] at a point x on or off the lattice.

    With a jump the displacement z is replaced by j(x,z) inside the integrand;
    with a block only the selected coordinates move.
    """
    g = u.geometry
    axes = list(g.axes(block))
    if kernel.dim != len(axes):
        raise InvalidInputError(
            f"kernel dimension {kernel.dim} does not match block {block!r} of dimension {len(axes)}"
        )
    if jump is not None and jump.dim != kernel.dim:
        raise InvalidInputError(f"jump dimension {jump.dim} does not match kernel {kernel.dim}")

    x = np.asarray(x, dtype=float).reshape(g.d)
    x_k = x[axes]
    order = settings.interpolation_order
    grad = u.gradient_at(x, order)[axes]
    inner = u.multilinear_gradient_at(x)[axes] if order == 1 else grad
    hess = u.hessian_at(x, order)[np.ix_(axes, axes)]
    p = grad if split.gradient_override is None else np.asarray(split.gradient_override, dtype=float)
    if p.shape != grad.shape:
        raise InvalidInputError(f"gradient override must have {len(axes)} components")
    ux = float(u.interpolate(x[None, :], order)[0])
    scale = max(1.0, u.sup_norm())

    def displacement(z):
        return z if jump is None else jump(x_k, z)

    def shifted(z):
        points = np.repeat(x[None, :], len(z), axis=0)
        points[:, axes] += displacement(z)
        return u.interpolate(points, order)

    def taylor(z):
        jz = displacement(z)
        return 0.5 * np.einsum("ni,ij,nj->n", jz, hess, jz)

    def compensated(gradient):
        return lambda z: shifted(z) - ux - displacement(z) @ gradient

    def raw(z):
        return shifted(z) - ux

    r_t = min(settings.taylor_radius or g.h, split.delta)
    quad = dataclasses.replace(settings.quadrature, atol=settings.quadrature.atol * scale)
    total = integrate(kernel, x_k, taylor, r_outer=r_t, settings=quad, what="Taylor core").value

    pieces = [(r_t, split.delta, compensated(inner)), (split.delta, 1.0, compensated(p))]
    radius = 1.0
    while radius < settings.far_radius:
        pieces.append((radius, min(2 * radius, settings.far_radius), raw))
        radius *= 2
    for r_inner, r_outer, integrand in pieces:
        if r_outer <= r_inner:
            continue
        total += integrate(
            kernel,
            x_k,
            integrand,
            r_inner=r_inner,
            r_outer=r_outer,
            settings=_ring_settings(settings, kernel, g.h, r_outer, scale),
            what=f"operator ring [{r_inner:g}, {r_outer:g}]",
        ).value
    total += (u.mean() - ux) * tail_mass(kernel, x_k, settings.far_radius, settings.quadrature)
    return total


def eval_levy_ito(
    jump: JumpFunction,
    kernel: LevyKernel,
    u: GridFunction,
    x: np.ndarray,
    split: SplitSpec,
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> float:
    return eval_nonlocal(kernel, u, x, split, jump=jump, settings=settings)


def eval_directional(
    kernel: LevyKernel,
    u: GridFunction,
    x: np.ndarray,
    which: Block,
    split: SplitSpec,
    jump: JumpFunction | None = None,
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> float:
    """The operator acting on one coordinate block with the other frozen."""
    if which not in (1, 2):
        raise InvalidInputError(f"which must be 1 or 2, got {which!r}")
    return eval_nonlocal(kernel, u, x, split, jump=jump, block=which, settings=settings)


def apply_nonlocal(
    kernel: LevyKernel,
    u: GridFunction,
    split: SplitSpec,
    *,
    block: Block = "full",
    jump: JumpFunction | None = None,
    settings: OperatorSettings = DEFAULT_OPERATOR_SETTINGS,
) -> GridFunction:
    """The operator at every lattice point by direct quadrature."""
    g = u.geometry
    values = np.empty(g.shape)
    for index in np.ndindex(*g.shape):
        try:
            values[index] = eval_nonlocal(
                kernel, u, g.point(index), split, jump=jump, block=block, settings=settings
            )
        except QuadratureError as error:
            raise QuadratureError(
                f"at lattice point {index}: {error}", error.value, error.error
            ) from error
    return u.with_values(values)


@dataclass(frozen=True)
class LocalJet:
    gradient: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    hessian: np.ndarray
    trace_block1: float
    trace_block2: float


def eval_local(u: GridFunction, index) -> LocalJet:
    """Finite-difference jet at a lattice point."""
    g = u.geometry
    index = tuple(int(i) % g.n for i in np.atleast_1d(index))
    if len(index) != g.d:
        raise InvalidInputError(f"lattice index must have {g.d} entries")
    forward = np.empty(g.d)
    backward = np.empty(g.d)
    for i in range(g.d):
        step = np.zeros(g.d, dtype=int)
        step[i] = 1
        forward[i] = (u.at(np.add(index, step)) - u.at(index)) / g.h
        backward[i] = (u.at(index) - u.at(np.subtract(index, step))) / g.h
    hessian = u.hessian_field[(slice(None), slice(None)) + index].copy()
    diagonal = np.diag(hessian)
    return LocalJet(
        gradient=u.gradient_field[(slice(None),) + index].copy(),
        forward=forward,
        backward=backward,
        hessian=hessian,
        trace_block1=float(np.sum(diagonal[list(g.axes(1))])),
        trace_block2=float(np.sum(diagonal[list(g.axes(2))])),
    )


def _angular_average(d: int, r: float) -> float:
    """∫_{S^{d-1}} cos(r θ_1) dθ."""
    match d:
        case 1:
            return 2.0 * math.cos(r)
        case 2:
            return 2.0 * math.pi * special.j0(r)
        case 3:
            return 4.0 * math.pi * (math.sin(r) / r if r > 0 else 1.0)
    raise InvalidInputError(f"symbol constant implemented for d in 1..3, got {d}")


def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@lru_cache(maxsize=64)
def fractional_symbol_constant(d: int, beta: float) -> float:
    """C(d,β) = ∫(1 - cos z_1)|z|^(-d-β) dz, by radial quadrature."""
    area = _sphere_area(d)

    def smooth(r):
        # (area - angular average) / r^2 stays bounded at 0
        if r < 1e-4:
            return area / (2 * d)
        return (area - _angular_average(d, r)) / r**2

    inner, _ = scipy_integrate.quad(smooth, 0.0, 1.0, weight="alg", wvar=(1.0 - beta, 0.0))
    outer = area / beta
    match d:
        case 1:
            osc, _ = scipy_integrate.quad(lambda r: r ** (-1 - beta), 1.0, np.inf, weight="cos", wvar=1.0)
            outer -= 2.0 * osc
        case 3:
            osc, _ = scipy_integrate.quad(lambda r: r ** (-2 - beta), 1.0, np.inf, weight="sin", wvar=1.0)
            outer -= 4.0 * math.pi * osc
        case 2:
            cut = 400.0
            body, _ = scipy_integrate.quad(lambda r: r ** (-1 - beta) * special.j0(r), 1.0, cut, limit=2000)
            # J0(r) ~ sqrt(2/(πr)) cos(r - π/4) beyond the cut
            amp = lambda r: math.sqrt(2.0 / math.pi) * r ** (-1.5 - beta)  # noqa: E731
            cos_part, _ = scipy_integrate.quad(amp, cut, np.inf, weight="cos", wvar=1.0)
            sin_part, _ = scipy_integrate.quad(amp, cut, np.inf, weight="sin", wvar=1.0)
            outer -= 2.0 * math.pi * (body + (cos_part + sin_part) / math.sqrt(2.0))
    return inner + outer


def fractional_symbol_constant_closed_form(d: int, beta: float) -> float:
    return math.pi ** (d / 2) * abs(math.gamma(-beta / 2)) / (2**beta * math.gamma((d + beta) / 2))


def fractional_symbol(d: int, beta: float, xi: np.ndarray) -> np.ndarray:
    """m(β,|ξ|) = C(d,β)|ξ|^β."""
    return fractional_symbol_constant(d, beta) * np.abs(xi) ** beta


def fractional_laplacian_spectral(u: GridFunction, beta: float, which: Block = "full") -> GridFunction:
    """(-Δ)^{β/2} u on the selected block via the Fourier multiplier; equals -I."""
    if not 0.0 < beta < 2.0:
        raise InvalidInputError(f"beta must lie in (0, 2), got {beta}")
    g = u.geometry
    axes = g.axes(which)
    wavenumbers = 2 * np.pi * np.fft.fftfreq(g.n, d=g.h)
    xi_squared = np.zeros(g.shape)
    for axis in axes:
        shape = [1] * g.d
        shape[axis] = g.n
        xi_squared = xi_squared + wavenumbers.reshape(shape) ** 2
    symbol = fractional_symbol(len(axes), beta, np.sqrt(xi_squared))
    return u.with_values(np.real(np.fft.ifftn(symbol * np.fft.fftn(u.values))))


def mode_amplitude(u: GridFunction, mode: tuple[int, ...]) -> float:
    """Amplitude A of a product-of-cosines component A·Π cos(2π k_i x_i)."""
    g = u.geometry
    if len(mode) != g.d:
        raise InvalidInputError(f"mode must have {g.d} entries")
    coefficient = np.fft.fftn(u.values)[tuple(k % g.n for k in mode)]
    nonzero = sum(1 for k in mode if k % g.n != 0)
    return float(np.real(coefficient)) * 2**nonzero / u.values.size
