"""Radial-angular product rules for integrals against singular Lévy densities.

Radial rules work on geometric cells (ratio 2) with Gauss-Legendre nodes.
Integrals reaching the origin end in a Gauss-Jacobi core cell carrying the
r^(1-beta) behaviour of |z|^2-compensated integrands; integrals reaching
infinity use Gauss-Jacobi nodes in t = 1/r. Angular rules are exact arcs
(d=2) or polar caps (d=3) adapted to a cone axis, so cone integrals carry no
indicator error.
"""

import math
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy import special

from mide_lab.errors import InvalidInputError


class Region(StrEnum):
    BALL = "ball"
    CONE = "cone"
    CONE_COMPLEMENT = "cone-complement"


@dataclass(frozen=True)
class QuadratureSettings:
    """Resolution and tolerance of the product rules.

    order: Gauss nodes per radial cell at the primary resolution.
    check_order: nodes per cell for the comparison integral.
    angular: nodes per full circle (d=2) or per polar interval (d=3).
    levels: geometric cells between a radius and the Jacobi core.
    max_cell: optional cap on radial cell length, for oscillating integrands.
    enforce: raise when the error estimate exceeds the tolerance.
    """

    order: int = 8
    check_order: int = 12
    angular: int = 48
    levels: int = 6
    rtol: float = 1e-6
    atol: float = 1e-10
    max_cell: float | None = None
    enforce: bool = True

    def __post_init__(self):
        assert self.order >= 2 and self.check_order > self.order
        assert self.angular >= 4 and self.levels >= 1


DEFAULT_SETTINGS = QuadratureSettings()


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    degenerate: bool = False

    def __float__(self) -> float:
        return self.value

    def within(self, settings: QuadratureSettings) -> bool:
        return self.error <= settings.atol + settings.rtol * abs(self.value)


@dataclass(frozen=True)
class ProductRule:
    """Nodes z (N, k) and weights (N,) with the polar Jacobian folded in."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "ProductRule":
        return cls(np.zeros((0, dim)), np.zeros(0))

    def __len__(self) -> int:
        return len(self.weights)


def _gauss(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _jacobi_core(c: float, order: int, exponent: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ∫_0^c F(r) dr when F(r) ~ r^exponent near 0."""
    t, w = special.roots_jacobi(order, 0.0, exponent)
    r = 0.5 * c * (1.0 + t)
    return r, w * (0.5 * c) ** (exponent + 1.0) * r ** (-exponent)


def _split(edges: list[float], max_cell: float | None) -> list[tuple[float, float]]:
    cells = []
    for a, b in zip(edges[:-1], edges[1:]):
        pieces = 1 if max_cell is None else max(1, math.ceil((b - a) / max_cell))
        cuts = np.linspace(a, b, pieces + 1)
        cells.extend(zip(cuts[:-1], cuts[1:]))
    return cells


def radial_rule(
    r_inner: float,
    r_outer: float,
    order: int,
    *,
    beta: float,
    levels: int,
    max_cell: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes r and weights W with Σ W F(r) ≈ ∫_{r_inner}^{r_outer} F(r) dr."""
    if not 0.0 <= r_inner < r_outer:
        raise InvalidInputError(f"need 0 <= r_inner < r_outer, got ({r_inner}, {r_outer})")
    if math.isinf(r_outer):
        if r_inner <= 0.0:
            raise InvalidInputError("an unbounded radial range needs r_inner > 0")
        return _tail_rule(r_inner, order, beta=beta, levels=levels)

    nodes, weights = [], []
    if r_inner == 0.0:
        core = r_outer / 2.0**levels
        r, w = _jacobi_core(core, order, 1.0 - beta)
        nodes.append(r)
        weights.append(w)
        edges = [core * 2.0**k for k in range(levels + 1)]
    else:
        edges = [r_inner]
        while edges[-1] * 2.0 < r_outer:
            edges.append(edges[-1] * 2.0)
        edges.append(r_outer)
    for a, b in _split(edges, max_cell):
        r, w = _gauss(a, b, order)
        nodes.append(r)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _tail_rule(r_inner: float, order: int, *, beta: float, levels: int):
    # substitute t = 1/r; F(1/t) t^-2 ~ t^(beta-1) for densities ~ r^(-1-beta)
    c = 1.0 / r_inner
    core = c / 2.0**levels
    t_core, w_core = _jacobi_core(core, order, beta - 1.0)
    ts, ws = [t_core], [w_core]
    for k in range(levels):
        t, w = _gauss(core * 2.0**k, core * 2.0 ** (k + 1), order)
        ts.append(t)
        ws.append(w)
    t = np.concatenate(ts)
    return 1.0 / t, np.concatenate(ws) / t**2


def _orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.eye(3)[int(np.argmin(np.abs(axis)))]
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def _circle(arcs: list[tuple[float, float]], order: int):
    angles, weights = [], []
    for a, b in arcs:
        if b - a <= 0.0:
            continue
        x, w = _gauss(a, b, order)
        angles.append(x)
        weights.append(w)
    if not angles:
        return np.zeros((0, 2)), np.zeros(0)
    phi = np.concatenate(angles)
    return np.column_stack([np.cos(phi), np.sin(phi)]), np.concatenate(weights)


def _caps(axis: np.ndarray, bands: list[tuple[float, float]], order: int):
    e1, e2 = _orthonormal_frame(axis)
    azimuth = 2 * order
    psi = 2 * np.pi * (np.arange(azimuth) + 0.5) / azimuth
    dirs, weights = [], []
    for a, b in bands:
        if b - a <= 0.0:
            continue
        t, w = _gauss(a, b, order)
        s = np.sqrt(np.clip(1.0 - t**2, 0.0, None))
        tt, pp = np.meshgrid(t, psi, indexing="ij")
        ss, _ = np.meshgrid(s, psi, indexing="ij")
        dirs.append(
            tt.reshape(-1, 1) * axis
            + (ss * np.cos(pp)).reshape(-1, 1) * e1
            + (ss * np.sin(pp)).reshape(-1, 1) * e2
        )
        weights.append(np.repeat(w, azimuth) * (2 * np.pi / azimuth))
    if not dirs:
        return np.zeros((0, 3)), np.zeros(0)
    return np.concatenate(dirs), np.concatenate(weights)


def angular_rule(
    dim: int,
    order: int,
    region: Region = Region.BALL,
    axis: np.ndarray | None = None,
    cos_min: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions and surface weights on S^{dim-1}.

    For cone regions the directions satisfy |axis·θ| >= cos_min (or < cos_min
    for the complement).
    """
    if region is not Region.BALL:
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        cos_min = float(np.clip(cos_min, 0.0, 1.0))

    match dim:
        case 1:
            # both directions lie on the axis: every cone is the whole sphere
            if region is Region.CONE_COMPLEMENT:
                return np.zeros((0, 1)), np.zeros(0)
            return np.array([[-1.0], [1.0]]), np.ones(2)
        case 2:
            if region is Region.BALL:
                phi = 2 * np.pi * (np.arange(order) + 0.5) / order
                return (
                    np.column_stack([np.cos(phi), np.sin(phi)]),
                    np.full(order, 2 * np.pi / order),
                )
            phi0 = math.atan2(axis[1], axis[0])
            half = math.acos(cos_min)
            arc_order = max(4, order // 2)
            if region is Region.CONE:
                arcs = [(phi0 - half, phi0 + half), (phi0 + np.pi - half, phi0 + np.pi + half)]
            else:
                arcs = [
                    (phi0 + half, phi0 + np.pi - half),
                    (phi0 + np.pi + half, phi0 + 2 * np.pi - half),
                ]
            return _circle(arcs, arc_order)
        case 3:
            if region is Region.BALL:
                return _caps(np.array([0.0, 0.0, 1.0]), [(-1.0, 1.0)], order)
            if region is Region.CONE:
                return _caps(axis, [(cos_min, 1.0), (-1.0, -cos_min)], order)
            return _caps(axis, [(-cos_min, cos_min)], order)
        case _:
            raise InvalidInputError(
                f"angular rules are implemented for dimensions 1 to 3, got {dim}"
            )


def product_rule(
    dim: int,
    radial: tuple[np.ndarray, np.ndarray],
    angular: tuple[np.ndarray, np.ndarray],
) -> ProductRule:
    r, wr = radial
    theta, wt = angular
    if len(wt) == 0:
        return ProductRule.empty(dim)
    points = (r[:, None, None] * theta[None, :, :]).reshape(-1, dim)
    weights = (wr[:, None] * r[:, None] ** (dim - 1) * wt[None, :]).reshape(-1)
    return ProductRule(points, weights)


def pairwise_sum(values: np.ndarray) -> float:
    """Deterministic pairwise reduction."""
    values = np.asarray(values, dtype=float)
    while len(values) > 1:
        if len(values) % 2:
            values = np.append(values, 0.0)
        values = values[0::2] + values[1::2]
    return float(values[0]) if len(values) else 0.0
