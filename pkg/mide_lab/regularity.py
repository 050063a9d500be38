"""Moduli of continuity, Hölder fits and doubling-based seminorm certificates."""

import math
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from mide_lab.errors import InvalidInputError, UnfitTableError
from mide_lab.estimates import PhiFamily, ShiftTable, TestFunctionPhi, locate_max, shift_table
from mide_lab.grid import Block, GridFunction
from mide_lab.logs import log
from mide_lab.solver import EquationSpec, Trajectory, solve_stationary

MAX_FULL_PAIRS_N = 128
FIT_T_MAX = 0.1
LIPSCHITZ_STABILITY = 0.2
HOLDER_SLACK = 0.15
RATIO_SEPARATIONS = 4


def _moving_axes(u: GridFunction, direction: Block) -> tuple[int, ...]:
    g = u.geometry
    axes = g.axes(direction)
    if not axes:
        raise InvalidInputError(f"block {direction!r} is empty for geometry {g}")
    return axes


def _pair_table(u: GridFunction, direction: Block) -> ShiftTable:
    g = u.geometry
    if direction == "full" and g.d >= 2 and g.n > MAX_FULL_PAIRS_N:
        raise InvalidInputError(
            f"full-direction pair enumeration is limited to n <= {MAX_FULL_PAIRS_N} when d >= 2"
        )
    if not np.all(np.isfinite(u.values)):
        raise InvalidInputError("field must be finite")
    return shift_table(u, u, direction)


@dataclass(frozen=True, eq=False)
class ModulusReport:
    """ω(t) = max |u(x) - u(y)| over lattice pairs with separation <= t."""

    direction: Block
    h: float
    t: np.ndarray
    omega: np.ndarray
    alpha: float = math.nan
    L: float = math.nan
    fit_range: tuple[float, float] = (math.nan, math.nan)
    fit_residual: float = math.nan

    def at(self, t: float) -> float:
        k = int(np.searchsorted(self.t, t * (1 + 1e-12), side="right")) - 1
        return float(self.omega[k]) if k >= 0 else 0.0

    def lipschitz_ratio(self, separations: int = RATIO_SEPARATIONS) -> float:
        """max ω(t)/t over the smallest lattice separations."""
        head = slice(0, min(separations, len(self.t)))
        return float(np.max(self.omega[head] / self.t[head]))

    def to_rows(self) -> list[dict]:
        return [
            {"direction": str(self.direction), "t": float(t), "omega": float(w)}
            for t, w in zip(self.t, self.omega)
        ]


def default_window(h: float, t0: float = math.inf) -> tuple[float, float]:
    return 4 * h, min(FIT_T_MAX, t0)


def modulus(u: GridFunction, direction: Block = "full", fit: bool = True) -> ModulusReport:
    """Empirical modulus at separations t = m·h.

    Partial directions compare points that agree in the other block.
    The report carries a fit over the default window when one is possible.
    """
    g = u.geometry
    _moving_axes(u, direction)
    table = _pair_table(u, direction)
    distances = table.distances()
    order = np.argsort(distances, kind="stable")
    running = np.maximum.accumulate(np.maximum(table.maxima[order], 0.0))
    t = np.arange(1, g.n // 2 + 1) * g.h
    k = np.searchsorted(distances[order], t * (1 + 1e-12), side="right") - 1
    report = ModulusReport(direction, g.h, t, running[k])
    if not fit:
        return report
    window = default_window(g.h)
    try:
        alpha, L, residual = _fit(report, *window)
    except UnfitTableError:
        return report
    return ModulusReport(direction, g.h, t, report.omega, alpha, L, window, residual)


def _fit(report: ModulusReport, t_min: float, t_max: float) -> tuple[float, float, float]:
    if t_min <= 0.0:
        raise InvalidInputError(f"fit window must start above 0, got t_min = {t_min}")
    if t_min >= t_max:
        raise UnfitTableError(f"empty fit window [{t_min:.4g}, {t_max:.4g}]")
    inside = (report.t >= t_min * (1 - 1e-12)) & (report.t <= t_max * (1 + 1e-12))
    t, omega = report.t[inside], report.omega[inside]
    if len(t) < 2:
        raise UnfitTableError(f"fewer than two separations in [{t_min:.4g}, {t_max:.4g}]")
    if np.any(omega <= 0.0):
        raise UnfitTableError("modulus vanishes inside the fit window")
    slope, intercept = np.polyfit(np.log(t), np.log(omega), 1)
    fitted = slope * np.log(t) + intercept
    residual = float(np.sqrt(np.mean((np.log(omega) - fitted) ** 2)))
    return float(slope), float(math.exp(intercept)), residual


def fit_exponent(report: ModulusReport, t_min: float, t_max: float) -> tuple[float, float]:
    """Least squares of log ω against log t: (slope, exp(intercept))."""
    alpha, L, _ = _fit(report, t_min, t_max)
    return alpha, L


def _unit_phi(family: PhiFamily, alpha: float, rho: float | None) -> TestFunctionPhi:
    match PhiFamily(family):
        case PhiFamily.HOLDER:
            return TestFunctionPhi.holder(1.0, alpha)
        case PhiFamily.LIPSCHITZ:
            if rho is None:
                raise InvalidInputError("the lipschitz-regularized family needs rho")
            return TestFunctionPhi.lipschitz(1.0, alpha, rho)


def _doubling_maximum(table: ShiftTable, phi: TestFunctionPhi, distances: np.ndarray) -> float:
    return float(np.max(table.maxima - phi.value(distances)))


@dataclass(frozen=True, eq=False)
class Certificate:
    """Smallest L with max_{x,y} u(x) - u(y) - L·φ₁(|x - y|) <= 0."""

    L_min: float
    family: PhiFamily
    alpha: float
    direction: Block
    bisection_steps: int
    bracket: tuple[float, float]
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def __float__(self) -> float:
        return self.L_min

    def to_record(self) -> dict:
        return {
            "family": str(self.family),
            "alpha": self.alpha,
            "direction": str(self.direction),
            "L_min": self.L_min,
            "bisection_steps": self.bisection_steps,
        }


def certify(
    u: GridFunction,
    phi_family: PhiFamily | str,
    alpha: float,
    direction: Block = "full",
    *,
    rho: float | None = None,
    rtol: float = 1e-10,
) -> Certificate:
    """Bisect on L for the sign of the doubling maximum, then snap to the
    pair that stays active at the threshold."""
    family = PhiFamily(phi_family)
    unit = _unit_phi(family, alpha, rho)
    _moving_axes(u, direction)
    table = _pair_table(u, direction)
    distances = table.distances()
    moved = distances > 0.0
    if not np.any(moved) or np.max(table.maxima[moved]) <= 0.0:
        return Certificate(0.0, family, alpha, direction, 0, (0.0, 0.0))

    def maximum(L: float) -> float:
        return _doubling_maximum(table, unit.with_L(L), distances) if L > 0.0 else math.inf

    lo, hi = 0.0, 1.0
    while maximum(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
    steps = 0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if maximum(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        steps += 1

    quotients = np.where(moved, table.maxima / np.where(moved, unit.value(distances), 1.0), -np.inf)
    k = int(np.argmax(quotients))
    L_min = float(quotients[k])
    point = table.max_point(k, 0.0, block=direction)
    if not lo * (1.0 - rtol) <= L_min <= hi * (1.0 + rtol):
        log.warning(
            "Certified seminorm outside the bisection bracket",
            family=str(family), alpha=alpha, L_min=L_min, lo=lo, hi=hi,
        )
    log.debug("Certified seminorm", family=str(family), alpha=alpha, L_min=L_min, steps=steps)
    return Certificate(L_min, family, alpha, direction, steps, (lo, hi), (point.x_index, point.y_index))


def witness_maximum(u: GridFunction, certificate: Certificate, rho: float | None = None) -> float:
    """Full-direction doubling maximum at the certified L, recomputed by `locate_max`."""
    if certificate.L_min == 0.0:
        return 0.0
    phi = _unit_phi(certificate.family, certificate.alpha, rho).with_L(certificate.L_min)
    return locate_max(u, u, phi).value


def seminorm(u: GridFunction, alpha: float, direction: Block = "full") -> float:
    """sup_{x≠y} (u(x) - u(y)) / |x - y|^α by a direct double loop over pairs."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    g = u.geometry
    moving = _moving_axes(u, direction)
    fixed = [i for i in range(g.d) if i not in moving]
    indices = np.array(list(np.ndindex(*g.shape)), dtype=int)
    values = u.values.reshape(-1)
    best = 0.0
    for i, index in enumerate(indices):
        offset = (index - indices + g.n // 2) % g.n - g.n // 2
        same = np.all(offset[:, fixed] == 0, axis=1) if fixed else np.ones(len(indices), dtype=bool)
        distance = np.linalg.norm(offset, axis=1) * g.h
        keep = same & (distance > 0.0)
        if np.any(keep):
            best = max(best, float(np.max((values[i] - values[keep]) / distance[keep] ** alpha)))
    return best


class RegimeKind(StrEnum):
    LIPSCHITZ = "lipschitz"
    HOLDER = "holder"
    UNCHARACTERIZED = "uncharacterized"


@dataclass(frozen=True)
class Prediction:
    kind: RegimeKind
    alpha_max: float = 1.0

    @classmethod
    def lipschitz(cls) -> "Prediction":
        return cls(RegimeKind.LIPSCHITZ)

    @classmethod
    def holder(cls, alpha_max: float) -> "Prediction":
        if not 0.0 < alpha_max <= 1.0:
            raise InvalidInputError(f"alpha_max must lie in (0, 1], got {alpha_max}")
        return cls(RegimeKind.HOLDER, alpha_max)


def predicted_regularity(beta: float, k: float) -> Prediction:
    """Regime of the partial regularity result in the nonlocal block.

    β > 1 with k <= β gives Lipschitz; β <= 1 with k < β gives every Hölder
    exponent below (β - k)/(1 - k). Everything else is left open.
    """
    if not 0.0 < beta < 2.0 or k < 0.0:
        raise InvalidInputError(f"need beta in (0, 2) and k >= 0, got beta={beta}, k={k}")
    if beta > 1.0 and k <= beta:
        return Prediction.lipschitz()
    if beta <= 1.0 and k < beta:
        return Prediction.holder(min(1.0, (beta - k) / (1.0 - k)))
    return Prediction(RegimeKind.UNCHARACTERIZED, math.nan)


@dataclass(frozen=True, eq=False)
class Verdict:
    spec_name: str
    prediction: Prediction
    direction: Block
    status: str
    alpha_hat: float
    ratios: tuple[float, float]
    ratio_change: float
    window: tuple[float, float]
    reports: dict = field(default_factory=dict)
    profile_checked: bool = False

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_record(self) -> dict:
        return {
            "equation": self.spec_name,
            "prediction": str(self.prediction.kind),
            "alpha_max": self.prediction.alpha_max,
            "direction": str(self.direction),
            "alpha_hat": self.alpha_hat,
            "ratio_coarse": self.ratios[0],
            "ratio_fine": self.ratios[1],
            "ratio_change": self.ratio_change,
            "fit_t_min": self.window[0],
            "fit_t_max": self.window[1],
            "profile_checked": self.profile_checked,
            "status": self.status,
        }


def regularity_experiment(
    spec: EquationSpec,
    prediction: Prediction,
    direction: Block = 1,
    *,
    tol: float = 1e-6,
    max_steps: int = 200_000,
    t0: float = math.inf,
) -> Verdict:
    """Solve at n and 2n, measure the modulus in `direction` and judge the
    prediction against the finer solution."""
    reports: dict[str, ModulusReport] = {}
    ratios = []
    for spec_n in (spec, spec.regrid(2 * spec.geometry.n)):
        n = spec_n.geometry.n
        u = solve_stationary(spec_n, tol=tol, max_steps=max_steps).u
        reports[f"{direction}@{n}"] = modulus(u, direction, fit=False)
        g = u.geometry
        if direction != "full" and (g.d == 1 or g.n <= MAX_FULL_PAIRS_N):
            reports[f"full@{n}"] = modulus(u, "full", fit=False)
        ratios.append(reports[f"{direction}@{n}"].lipschitz_ratio())

    fine = reports[f"{direction}@{2 * spec.geometry.n}"]
    window = default_window(fine.h, t0)
    try:
        alpha_hat, _ = fit_exponent(fine, *window)
    except UnfitTableError:
        # a field constant in this direction is as regular as it gets
        alpha_hat = 1.0 if np.max(fine.omega) == 0.0 else math.nan
    change = abs(ratios[1] - ratios[0]) / ratios[0] if ratios[0] > 0.0 else 0.0

    match prediction.kind:
        case RegimeKind.LIPSCHITZ:
            status = "PASS" if change <= LIPSCHITZ_STABILITY else "FAIL"
        case RegimeKind.HOLDER:
            status = "PASS" if alpha_hat >= prediction.alpha_max - HOLDER_SLACK else "FAIL"
        case RegimeKind.UNCHARACTERIZED:
            status = "UNCHARACTERIZED"
    log.info(
        "Regularity experiment",
        equation=spec.name,
        prediction=str(prediction.kind),
        alpha_hat=alpha_hat,
        ratio_change=change,
        status=status,
    )
    return Verdict(
        spec.name, prediction, direction, status, alpha_hat, tuple(ratios), change, window, reports,
        spec.profile_checked,
    )


@dataclass(frozen=True, eq=False)
class TrajectoryCertificate:
    times: np.ndarray
    certificates: list[Certificate]

    @property
    def L_max(self) -> float:
        return max(c.L_min for c in self.certificates)

    def to_rows(self) -> list[dict]:
        return [{"t": float(t)} | c.to_record() for t, c in zip(self.times, self.certificates)]


def certify_trajectory(
    trajectory: Trajectory,
    phi_family: PhiFamily | str,
    alpha: float,
    direction: Block = "full",
    *,
    rho: float | None = None,
) -> TrajectoryCertificate:
    """Space-time doubling with the time variables frozen together: the
    supremum over snapshots of the spatial certificate."""
    certificates = [certify(u, phi_family, alpha, direction, rho=rho) for u in trajectory.snapshots]
    return TrajectoryCertificate(np.asarray(trajectory.times), certificates)
