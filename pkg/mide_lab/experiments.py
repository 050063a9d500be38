"""Experiment suites behind `mide-lab run`.

Every suite writes its tables through an ArtifactWriter; assertion rows carry
a `status` column whose FAIL rows decide the exit status.
"""

import json
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from mide_lab import config as cfg
from mide_lab.artifacts import ArtifactWriter
from mide_lab.errors import ConfigError, DivergenceError, InstabilityError, InvalidInputError, QuadratureError
from mide_lab.estimates import (
    DoublingGeometry,
    PhiFamily,
    TestFunctionPhi,
    concave_estimate_sides,
    directional_sign_analysis,
    levy_ito_concave_sides,
    locate_max,
    quadratic_bound,
    quadratic_estimate_sides,
)
from mide_lab.expressions import CoordinateExpression, coefficient
from mide_lab.grid import Geometry, GridFunction
from mide_lab.levy import (
    ConeSpec,
    JumpFunction,
    cone_constant_example,
    cone_mass,
    fractional_kernel,
    identity_jump,
    modulated_kernel,
    scaled_jump,
    verify_jump_conditions,
    verify_measure_conditions,
)
from mide_lab.logs import log
from mide_lab.matrixcalc import (
    PSD_TOL,
    check_block_inequality,
    conv_closed_form,
    convolution_threshold,
    convolve_triple,
    doubling_matrix,
    extract_blocks,
    random_axis,
    random_block_triple,
    random_trace_pair,
    sup_convolve_direct,
    tight_trace_instance,
    trace_bound_check,
)
from mide_lab.operators import mode_amplitude
from mide_lab.regularity import (
    Prediction,
    certify,
    certify_trajectory,
    predicted_regularity,
    regularity_experiment,
    seminorm,
)
from mide_lab.solver import (
    EquationSpec,
    Solution,
    active_controls,
    comparison_bound,
    control_residual,
    fixed_control_spec,
    solve_isaacs,
    solve_parabolic,
    solve_stationary,
)

CHECK_COLUMNS = {"check": str, "value": float, "expected": float, "error": float, "status": str}
CONVERGENCE_COLUMNS = {"step": int, "residual": float, "dt": float}


def status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def check_row(check: str, value: float, expected: float, rtol: float) -> dict:
    """Relative comparison, absolute when the expected value is zero."""
    error = abs(value - expected) / (abs(expected) if expected else 1.0)
    return {"check": check, "value": value, "expected": expected, "error": error, "status": status(error <= rtol)}


def bound_row(check: str, value: float, bound: float, slack: float = 0.0) -> dict:
    """value <= bound (+ slack)."""
    return {
        "check": check,
        "value": value,
        "expected": bound,
        "error": max(0.0, value - bound),
        "status": status(value <= bound + slack),
    }


@dataclass
class RunContext:
    config: cfg.ExperimentConfig
    writer: ArtifactWriter
    seed: int
    jobs: int = 1
    tol_scale: float = 1.0

    def rng(self, stream: int, index: int) -> np.random.Generator:
        """Counter-based generator: trial `index` of `stream` under the master seed."""
        key = np.array([self.seed, stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=index << 128))

    def map(self, function: Callable, items) -> list:
        items = list(items)
        if self.jobs == 1:
            return [function(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(function, items))


@dataclass(frozen=True)
class Experiment:
    kind: str
    description: str
    runner: Callable[[RunContext], None]


EXPERIMENTS: dict[str, Experiment] = {}


def experiment(kind: str, description: str):
    def register(runner):
        EXPERIMENTS[kind] = Experiment(kind, description, runner)
        return runner

    return register


def prepare(config: cfg.ExperimentConfig):
    """Build every runtime object a config names so errors surface before any
    artifact is written."""
    match config:
        case cfg.SolveConfig():
            spec = cfg.build_equation(config.equation)
            if config.check_comparison_bound and spec.zeroth_order <= 0.0:
                raise ConfigError(f"{config.name}: the comparison bound needs a positive zeroth-order term")
        case cfg.ParabolicConfig():
            coefficient(config.u0, cfg.build_equation(config.equation).geometry.d)
        case cfg.IsaacsConfig():
            if not cfg.build_equation(config.equation).controls:
                raise ConfigError(f"{config.name}: an isaacs experiment needs control families")
        case cfg.RegularityConfig():
            if config.equation is not None:
                cfg.build_equation(config.equation)
            for entry in config.certify:
                CoordinateExpression(entry.expression, entry.d)
        case cfg.ConditionsConfig():
            for subject in config.subjects:
                _build_subject(subject)


def run_experiment(ctx: RunContext):
    EXPERIMENTS[ctx.config.kind].runner(ctx)


# lemmas


EXTRACTION_COLUMNS = {
    "trial": int, "d1": int, "d2": int, "parent_margin": float,
    "first_margin": float, "second_margin": float, "status": str,
}
CONVOLUTION_COLUMNS = {
    "trial": int, "d1": int, "d2": int, "block_diagonal": bool, "eps": float,
    "eps0": float, "margin": float, "status": str,
}
CLOSED_FORM_COLUMNS = {"trial": int, "d": int, "alpha": float, "omega": float, "error": float, "status": str}
TRACE_COLUMNS = {
    "trial": int, "d": int, "alpha": float, "omega": float, "trace": float,
    "bound": float, "margin": float, "tight": bool, "status": str,
}


def _block_dims(rng: np.random.Generator, max_dim: int) -> tuple[int, int]:
    d1, d2 = rng.integers(1, max_dim + 1, size=2)
    return int(d1), int(d2)


@experiment("lemmas", "Randomized block-inequality, convolution and trace-bound lemmas")
def run_lemmas(ctx: RunContext):
    config: cfg.LemmasConfig = ctx.config
    floor = -PSD_TOL * ctx.tol_scale

    def extraction(i):
        rng = ctx.rng(0, i)
        d1, d2 = _block_dims(rng, config.max_block_dim)
        result = extract_blocks(random_block_triple(rng, d1, d2))
        ok = result.first_margin >= floor and result.second_margin >= floor
        return {
            "trial": i, "d1": d1, "d2": d2, "parent_margin": result.parent_margin,
            "first_margin": result.first_margin, "second_margin": result.second_margin,
            "status": status(ok),
        }

    def convolution(i):
        rng = ctx.rng(1, i)
        d1, d2 = _block_dims(rng, config.max_block_dim)
        block_diagonal = bool(rng.integers(2))
        triple = random_block_triple(rng, d1, d2, block_diagonal)
        eps0 = convolution_threshold(triple)
        eps = eps0 * float(rng.uniform(0.05, 0.95))
        margin = check_block_inequality(convolve_triple(triple, eps))
        return {
            "trial": i, "d1": d1, "d2": d2, "block_diagonal": block_diagonal,
            "eps": eps, "eps0": eps0, "margin": margin, "status": status(margin >= floor),
        }

    def closed_form(i):
        rng = ctx.rng(2, i)
        d = int(rng.integers(1, 4))
        alpha, omega = float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.0, 1.9))
        axis = random_axis(rng, d)
        closed = conv_closed_form(alpha, omega, axis)
        direct = sup_convolve_direct(doubling_matrix(alpha, omega, axis), alpha / 2.0)
        error = float(np.max(np.abs(closed.entries - direct.entries)))
        ok = error <= 1e-8 * max(1.0, closed.norm()) * ctx.tol_scale
        return {"trial": i, "d": d, "alpha": alpha, "omega": omega, "error": error, "status": status(ok)}

    def trace(i):
        rng = ctx.rng(3, i)
        d = int(rng.integers(1, 4))
        alpha, omega = float(rng.uniform(0.2, 2.0)), float(rng.uniform(1.0, 1.95))
        axis = random_axis(rng, d)
        tight = i % 10 == 0
        X, Y = tight_trace_instance(alpha, omega, axis) if tight else random_trace_pair(rng, alpha, omega, axis)
        result = trace_bound_check(X, Y, alpha, omega, axis)
        ok = result.satisfied
        if tight:
            ok = ok and abs(result.trace - result.bound) <= 1e-9 * max(1.0, abs(result.bound))
        return {
            "trial": i, "d": d, "alpha": alpha, "omega": omega, "trace": result.trace,
            "bound": result.bound, "margin": result.margin, "tight": tight, "status": status(ok),
        }

    ctx.writer.table("lemmas_block_extraction", EXTRACTION_COLUMNS, ctx.map(extraction, range(config.block_triples)))
    ctx.writer.table("lemmas_convolution", CONVOLUTION_COLUMNS, ctx.map(convolution, range(config.convolutions)))
    ctx.writer.table("lemmas_closed_form", CLOSED_FORM_COLUMNS, ctx.map(closed_form, range(config.closed_forms)))
    ctx.writer.table("lemmas_trace_bound", TRACE_COLUMNS, ctx.map(trace, range(config.trace_pairs)))


# estimates


ESTIMATE_COLUMNS = {
    "instance": int, "attempt": int, "operator": str, "kernel": str, "beta": float, "d": int,
    "family": str, "alpha": float, "L": float, "separation": float, "eta": float,
    "delta0": float, "lhs": float, "rhs": float, "margin": float,
    "cone_violations": int, "notes": str, "status": str,
}
QUADRATIC_COLUMNS = {
    "instance": int, "beta": float, "d": int, "jump": str, "eps": float, "delta": float,
    "norm_a": float, "lhs": float, "rhs": float, "status": str,
}
SKIPPED_COLUMNS = {
    "instance": int, "attempt": int, "operator": str, "beta": float, "d": int, "separation": float, "notes": str,
}
SIGN_COLUMNS = {
    "case": int, "alpha": float, "trace_threshold": float, "bisected_trace_ratio": float,
    "nonlocal_threshold": float, "bisected_nonlocal_ratio": float, "mechanism": str, "status": str,
}


def smooth_field(rng: np.random.Generator, geometry: Geometry, modes: int = 3) -> GridFunction:
    """A few random low Fourier modes, scaled to unit sup norm."""
    coords = geometry.coords()
    values = np.zeros(geometry.shape)
    for _ in range(modes):
        k = rng.integers(-2, 3, size=geometry.d)
        if not np.any(k):
            k[0] = 1
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amplitude = rng.normal() / (1.0 + float(k @ k))
        values += amplitude * np.cos(2.0 * np.pi * np.tensordot(k, coords, axes=1) + phase)
    scale = np.max(np.abs(values))
    return GridFunction(geometry, values / scale if scale > 0.0 else values)


def _lipschitz_rho(alpha: float) -> float:
    return 1.5 / (alpha * 2.0 ** (alpha - 1.0))


def _unit_phi(family: PhiFamily, alpha: float) -> TestFunctionPhi:
    if family is PhiFamily.HOLDER:
        return TestFunctionPhi.holder(1.0, alpha)
    return TestFunctionPhi.lipschitz(1.0, alpha, _lipschitz_rho(alpha))


def _scale_jump(d: int) -> JumpFunction:
    return scaled_jump(d, lambda x: 1.0 + 0.1 * math.sin(2.0 * math.pi * float(x[0])), 0.9, 1.1, 1.0)


ESTIMATE_ATTEMPTS = 32


def _estimate_instance(ctx: RunContext, i: int, attempt: int) -> dict:
    config: cfg.EstimatesConfig = ctx.config
    nb, nd, nf = len(config.betas), len(config.dims), len(config.families)
    beta = config.betas[i % nb]
    d = config.dims[(i // nb) % nd]
    family = PhiFamily(config.families[(i // (nb * nd)) % nf])
    levy_ito = (i // (nb * nd * nf)) % 2 == 1
    rng = ctx.rng(4, i * ESTIMATE_ATTEMPTS + attempt)

    kernel = fractional_kernel(d, beta)
    if not levy_ito and rng.random() < 0.5:
        kernel = modulated_kernel(kernel, lambda x: 1.0 + 0.25 * math.cos(2.0 * math.pi * float(x[0])), 1.0)
    u = smooth_field(rng, Geometry(d, 0, config.n))
    alpha = float(rng.uniform(0.3, 0.9))
    rho = _lipschitz_rho(alpha) if family is PhiFamily.LIPSCHITZ else None
    critical = certify(u, family, alpha, rho=rho).L_min
    L = critical * float(rng.uniform(0.3, 0.8))
    phi = _unit_phi(family, alpha).with_L(L)
    maxpoint = locate_max(u, u, phi)
    row = {
        "instance": i, "attempt": attempt, "operator": "levy-ito" if levy_ito else "concave", "kernel": kernel.name,
        "beta": beta, "d": d, "family": str(family), "alpha": alpha, "L": L,
        "separation": maxpoint.separation, "eta": math.nan, "delta0": math.nan, "lhs": math.nan,
        "rhs": math.nan, "margin": math.nan, "cone_violations": 0, "notes": "",
    }
    if maxpoint.degenerate:
        return row | {"notes": "degenerate maximum", "status": "SKIP"}

    jump = _scale_jump(d) if levy_ito else None
    needed = 0.1
    if jump is not None:
        # the middle cone needs eta >= needed and eta + delta0 < 0.9
        q = (maxpoint.separation / 2.0) ** jump.gamma * jump.C0 / jump.c0
        needed = max(needed, 1.05 * 4.0 * q / (1.0 + q))
    delta_hi = min(0.3, 0.85 - needed)
    if delta_hi <= 0.05:
        return row | {"notes": "separation too large for the middle cone", "status": "SKIP"}
    delta0 = float(rng.uniform(0.05, delta_hi))
    eta = float(rng.uniform(needed, 0.9 - delta0))
    row |= {"eta": eta, "delta0": delta0}
    geom = DoublingGeometry(maxpoint.a, eta, delta0)
    try:
        if jump is None:
            sides = concave_estimate_sides(kernel, u, u, phi, geom, maxpoint)
            violations = 0
        else:
            sides = levy_ito_concave_sides(jump, kernel, u, u, phi, geom, maxpoint)
            violations = sides.cone_violations
    except QuadratureError as error:
        return row | {"notes": str(error), "status": "FAIL"}
    return row | {
        "lhs": sides.lhs, "rhs": sides.rhs, "margin": sides.margin,
        "cone_violations": violations, "status": status(sides.holds and violations == 0),
    }


def _estimate_slot(ctx: RunContext, i: int) -> tuple[dict | None, list[dict]]:
    """Redraw instance `i` until its doubling maximum is non-degenerate and
    admits the middle cone."""
    skipped = []
    for attempt in range(ESTIMATE_ATTEMPTS):
        row = _estimate_instance(ctx, i, attempt)
        if row["status"] != "SKIP":
            return row, skipped
        skipped.append(row)
    log.warning("Estimate instance kept degenerating", instance=i, attempts=ESTIMATE_ATTEMPTS)
    return None, skipped


def _quadratic_instance(ctx: RunContext, i: int) -> dict:
    config: cfg.EstimatesConfig = ctx.config
    beta = config.betas[i % len(config.betas)]
    d = config.dims[(i // len(config.betas)) % len(config.dims)]
    rng = ctx.rng(5, i)
    jump = identity_jump(d) if i % 2 == 0 else _scale_jump(d)
    u = smooth_field(rng, Geometry(d, 0, config.n))
    eps = float(rng.uniform(0.3, 1.0))
    delta = float(rng.uniform(0.05, 0.5))
    row = {"instance": i, "beta": beta, "d": d, "jump": jump.name, "eps": eps, "delta": delta}
    try:
        sides = quadratic_estimate_sides(jump, fractional_kernel(d, beta), u, eps, delta)
    except QuadratureError:
        return row | {"norm_a": math.nan, "lhs": math.nan, "rhs": math.nan, "status": "FAIL"}
    return row | {
        "norm_a": sides.terms["norm_a"], "lhs": sides.lhs, "rhs": sides.rhs, "status": status(sides.holds),
    }


@experiment("estimates", "Nonlocal estimate inequalities on randomized doubling maxima")
def run_estimates(ctx: RunContext):
    config: cfg.EstimatesConfig = ctx.config
    slots = ctx.map(lambda i: _estimate_slot(ctx, i), range(config.instances))
    rows = [row for row, _ in slots if row is not None]
    ctx.writer.table("estimates_concave", ESTIMATE_COLUMNS, rows)
    ctx.writer.table("estimates_skipped", SKIPPED_COLUMNS, [row for _, skipped in slots for row in skipped])

    quadratic = ctx.map(lambda i: _quadratic_instance(ctx, i), range(config.quadratic_instances))
    ctx.writer.table("estimates_quadratic", QUADRATIC_COLUMNS, quadratic)

    anchor = quadratic_bound(identity_jump(1), fractional_kernel(1, 1.0), 1.0, np.array([0.1]), 0.1)
    checks = [
        check_row("non_degenerate_instances", len(rows), config.instances, 0.0),
        check_row("quadratic_bound_identity_anchor", anchor, 0.52, 1e-4 * ctx.tol_scale),
    ]
    ctx.writer.table("estimates_checks", CHECK_COLUMNS, checks)

    signs = []
    for case in range(config.sign_cases):
        rng = ctx.rng(6, case)
        alpha = float(rng.uniform(0.05, 0.95))
        eta_tilde = float(rng.uniform(0.75, 1.0))
        report = directional_sign_analysis(np.array([1.0]), np.array([1.0]), alpha, 1.0, eta_tilde)
        nonlocal_expected = report.nonlocal_threshold if report.nonlocal_threshold <= 1.0 else math.nan
        ok = abs(report.bisected_trace_ratio - report.trace_threshold) <= 1e-6 * ctx.tol_scale
        if math.isnan(nonlocal_expected):
            ok = ok and math.isnan(report.bisected_nonlocal_ratio)
        else:
            ok = ok and abs(report.bisected_nonlocal_ratio - nonlocal_expected) <= 1e-6 * ctx.tol_scale
        signs.append({
            "case": case, "alpha": alpha, "trace_threshold": report.trace_threshold,
            "bisected_trace_ratio": report.bisected_trace_ratio,
            "nonlocal_threshold": report.nonlocal_threshold,
            "bisected_nonlocal_ratio": report.bisected_nonlocal_ratio,
            "mechanism": report.mechanism, "status": status(ok),
        })
    ctx.writer.table("estimates_sign_thresholds", SIGN_COLUMNS, signs)


# conditions


CONDITION_COLUMNS = {
    "subject": int, "name": str, "condition": str, "passed": bool, "expected": str,
    "constants": str, "notes": str, "status": str,
}
CONE_COLUMNS = {
    "eta": float, "delta": float, "beta": float, "cone_mass": float,
    "closed_form": float, "error": float, "status": str,
}


def _build_subject(subject: cfg.ConditionSubject):
    kernel = subject.kernel.build()
    jump = None if subject.jump is None else subject.jump.build()
    return kernel, jump


@experiment("conditions", "Structural measure and jump conditions of configured kernels")
def run_conditions(ctx: RunContext):
    config: cfg.ConditionsConfig = ctx.config
    rows = []
    for index, subject in enumerate(config.subjects):
        kernel, jump = _build_subject(subject)
        reports = [verify_measure_conditions(kernel)]
        if jump is not None:
            reports.append(verify_jump_conditions(jump, kernel))
        for report in reports:
            for name, result in report.results.items():
                expected = subject.expect.get(name)
                rows.append({
                    "subject": index,
                    "name": report.subject,
                    "condition": name,
                    "passed": result.passed,
                    "expected": "" if expected is None else str(expected).lower(),
                    "constants": json.dumps(result.constants, sort_keys=True, default=float),
                    "notes": result.notes,
                    "status": "INFO" if expected is None else status(result.passed == expected),
                })
    ctx.writer.table("conditions", CONDITION_COLUMNS, rows)

    cones = []
    for check in config.cone_checks:
        kernel = fractional_kernel(2, check.beta)
        mass = cone_mass(kernel, ConeSpec(np.array([1.0, 0.0]), check.eta, check.delta)).value
        exact = cone_constant_example(2, check.beta, check.eta, check.delta)
        error = abs(mass - exact) / exact
        cones.append({
            "eta": check.eta, "delta": check.delta, "beta": check.beta, "cone_mass": mass,
            "closed_form": exact, "error": error, "status": status(error <= 0.01 * ctx.tol_scale),
        })
    if cones:
        ctx.writer.table("conditions_cone_mass", CONE_COLUMNS, cones)


# solve, parabolic, isaacs


def _write_convergence(ctx: RunContext, name: str, record) -> None:
    rows = [{"step": step, "residual": norm, "dt": dt} for step, norm, dt in record]
    ctx.writer.table(name, CONVERGENCE_COLUMNS, rows)


def _cosine_mode(geometry: Geometry, mode, amplitude: float) -> np.ndarray:
    coords = geometry.coords()
    return amplitude * np.prod([np.cos(2.0 * np.pi * k * coords[i]) for i, k in enumerate(mode)], axis=0)


def _stationary(ctx: RunContext, spec: EquationSpec, tol: float, max_steps: int, record_every: int, label: str):
    """Solve, writing the convergence history whether or not it converged."""
    try:
        solution = solve_stationary(spec, tol=tol, max_steps=max_steps, record_every=record_every)
    except DivergenceError as error:
        _write_convergence(ctx, f"{label}_convergence", error.history)
        return None, {"check": f"{label}_converged", "value": error.history[-1][1], "expected": tol,
                      "error": math.nan, "status": "FAIL"}
    _write_convergence(ctx, f"{label}_convergence", solution.record)
    return solution, bound_row(f"{label}_converged", solution.residual_norm, tol)


@experiment("solve", "Stationary solve with mode, refinement and comparison-bound checks")
def run_solve(ctx: RunContext):
    config: cfg.SolveConfig = ctx.config
    spec = cfg.build_equation(config.equation)
    solution, converged = _stationary(ctx, spec, config.tol, config.max_steps, config.record_every, "solve")
    checks = [converged]
    if solution is not None:
        ctx.writer.field("solution", solution.u)
        if config.mode_check is not None:
            mode = tuple(config.mode_check.mode)
            amplitude = mode_amplitude(solution.u, mode)
            checks.append(check_row(
                f"mode_amplitude{list(mode)}", amplitude, config.mode_check.value,
                config.mode_check.rtol * ctx.tol_scale,
            ))
        if config.check_comparison_bound:
            checks.append(bound_row(
                "comparison_bound", solution.u.sup_norm(), comparison_bound(spec), 1e-9 + config.tol,
            ))
    if config.refinement and config.mode_check is not None:
        mode = tuple(config.mode_check.mode)
        refinement = []
        for n in config.refinement:
            refined = spec.regrid(n)
            sol = solve_stationary(refined, tol=config.tol, max_steps=config.max_steps)
            exact = _cosine_mode(refined.geometry, mode, config.mode_check.value)
            refinement.append({"n": n, "error": float(np.max(np.abs(sol.u.values - exact)))})
        errors = [row["error"] for row in refinement]
        ctx.writer.table("solve_refinement", {"n": int, "error": float}, refinement)
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        checks.append({"check": "refinement_monotone", "value": errors[-1], "expected": errors[0],
                       "error": math.nan, "status": status(decreasing)})
    ctx.writer.table("solve_checks", CHECK_COLUMNS, checks)


TRAJECTORY_COLUMNS = {"t": float, "min": float, "max": float, "sup_norm": float}


@experiment("parabolic", "Explicit time marching with maximum-principle and decay checks")
def run_parabolic(ctx: RunContext):
    config: cfg.ParabolicConfig = ctx.config
    spec = cfg.build_equation(config.equation)
    g = spec.geometry
    initial = coefficient(config.u0, g.d)
    u0 = GridFunction.from_function(g, initial) if callable(initial) else GridFunction.constant(g, initial)
    try:
        trajectory = solve_parabolic(spec, u0, config.T, config.dt, config.snapshots)
    except InstabilityError as error:
        ctx.writer.table("parabolic_checks", CHECK_COLUMNS, [
            {"check": "stable", "value": math.nan, "expected": math.nan, "error": math.nan, "status": "FAIL"}
        ])
        log.warning("Parabolic run unstable", error=str(error))
        return
    rows = [
        {"t": float(t), "min": float(np.min(u.values)), "max": float(np.max(u.values)), "sup_norm": u.sup_norm()}
        for t, u in zip(trajectory.times, trajectory.snapshots)
    ]
    ctx.writer.table("parabolic_trajectory", TRAJECTORY_COLUMNS, rows)
    ctx.writer.field("final", trajectory.final)
    checks = []
    if trajectory.max_principle_ok is not None:
        checks.append({"check": "maximum_principle", "value": math.nan, "expected": math.nan,
                       "error": math.nan, "status": status(trajectory.max_principle_ok)})
    if config.decay_check is not None:
        mode = tuple(config.decay_check.mode)
        checks.append(check_row(
            f"mode_amplitude{list(mode)}_at_T", mode_amplitude(trajectory.final, mode),
            config.decay_check.value, config.decay_check.rtol * ctx.tol_scale,
        ))
    ctx.writer.table("parabolic_checks", CHECK_COLUMNS, checks)
    if config.certify_alpha is not None:
        certificate = certify_trajectory(trajectory, PhiFamily.HOLDER, config.certify_alpha)
        ctx.writer.table(
            "parabolic_certificates",
            {"t": float, "family": str, "alpha": float, "direction": str, "L_min": float, "bisection_steps": int},
            certificate.to_rows(),
        )


ACTIVE_COLUMNS = {"gamma": int, "delta": int, "points": int}


@experiment("isaacs", "Sup-inf control problems against fixed-control solves")
def run_isaacs(ctx: RunContext):
    config: cfg.IsaacsConfig = ctx.config
    spec = cfg.build_equation(config.equation)
    if not spec.controls:
        raise InvalidInputError("an isaacs experiment needs control families")
    try:
        solution = solve_isaacs(spec, tol=config.tol, max_steps=config.max_steps)
    except DivergenceError as error:
        _write_convergence(ctx, "isaacs_convergence", error.history)
        ctx.writer.table("isaacs_checks", CHECK_COLUMNS, [
            {"check": "isaacs_converged", "value": error.history[-1][1], "expected": config.tol,
             "error": math.nan, "status": "FAIL"}
        ])
        return
    _write_convergence(ctx, "isaacs_convergence", solution.record)
    ctx.writer.field("solution", solution.u)
    pairs, counts = np.unique(solution.active.reshape(2, -1), axis=1, return_counts=True)
    ctx.writer.table("isaacs_active_controls", ACTIVE_COLUMNS, [
        {"gamma": int(gd[0]), "delta": int(gd[1]), "points": int(c)} for gd, c in zip(pairs.T, counts)
    ])

    consistency = control_residual(spec, solution.u, solution.active).sup_norm()
    checks = [
        bound_row("isaacs_converged", solution.residual_norm, config.tol),
        bound_row("active_control_residual", consistency, config.tol, 1e-12),
    ]
    if config.compare_fixed_controls:
        checks += _fixed_control_checks(ctx, spec, solution, config)
    ctx.writer.table("isaacs_checks", CHECK_COLUMNS, checks)


def _fixed_control_checks(ctx: RunContext, spec: EquationSpec, solution: Solution, config) -> list[dict]:
    """Per-control solves bound the sup-inf solution when one family is trivial.

    With a single δ the operator dominates every F_γ, so u <= min_γ u_γ; with a
    single γ it is dominated by every F_δ, so u >= max_δ u_δ.
    """
    gammas, deltas = len(spec.controls), len(spec.controls[0])
    if gammas > 1 and deltas > 1:
        return []
    fixed = [
        solve_stationary(fixed_control_spec(spec, g, d), tol=config.tol, max_steps=config.max_steps).u.values
        for g in range(gammas)
        for d in range(deltas)
    ]
    c = spec.zeroth_order if spec.zeroth_order > 0.0 else 1.0
    slack = 4.0 * config.tol / c
    u = solution.u.values
    if deltas == 1:
        gap = float(np.max(u - np.min(fixed, axis=0)))
        return [bound_row("below_every_fixed_control", gap, 0.0, slack)]
    gap = float(np.max(np.max(fixed, axis=0) - u))
    return [bound_row("above_every_fixed_control", gap, 0.0, slack)]


# regularity


VERDICT_COLUMNS = {
    "equation": str, "prediction": str, "alpha_max": float, "direction": str, "alpha_hat": float,
    "ratio_coarse": float, "ratio_fine": float, "ratio_change": float,
    "fit_t_min": float, "fit_t_max": float, "profile_checked": bool, "status": str,
}
MODULUS_COLUMNS = {"report": str, "direction": str, "t": float, "omega": float}
CERTIFY_COLUMNS = {
    "expression": str, "family": str, "alpha": float, "n": int, "L_min": float,
    "expected": float, "seminorm": float, "error": float, "status": str,
}


def _prediction(config: cfg.PredictionConfig) -> Prediction:
    match config.kind:
        case "lipschitz":
            return Prediction.lipschitz()
        case "holder":
            return Prediction.holder(config.alpha_max)
        case "from-structure":
            return predicted_regularity(config.beta, config.k)


@experiment("regularity", "Moduli, fitted exponents and certified seminorms against predictions")
def run_regularity(ctx: RunContext):
    config: cfg.RegularityConfig = ctx.config
    if config.equation is not None:
        spec = cfg.build_equation(config.equation)
        verdict = regularity_experiment(
            spec, _prediction(config.prediction), config.direction, tol=config.tol, max_steps=config.max_steps
        )
        ctx.writer.table("regularity_verdict", VERDICT_COLUMNS, [verdict.to_record()])
        moduli = [
            {"report": label} | row for label, report in sorted(verdict.reports.items()) for row in report.to_rows()
        ]
        ctx.writer.table("regularity_moduli", MODULUS_COLUMNS, moduli)

    rows = []
    for entry in config.certify:
        g = Geometry(entry.d, 0, entry.n)
        u = GridFunction.from_function(g, CoordinateExpression(entry.expression, entry.d))
        L_min = certify(u, entry.family, entry.alpha, rho=entry.rho).L_min
        oracle = math.nan
        ok = True
        if entry.family == "holder" and entry.n <= 64:
            oracle = seminorm(u, entry.alpha)
            ok = abs(L_min - oracle) <= 1e-9 * max(oracle, 1.0)
        error = math.nan
        if entry.expected is not None:
            error = abs(L_min - entry.expected) / abs(entry.expected)
            ok = ok and error <= entry.rtol * ctx.tol_scale
        rows.append({
            "expression": entry.expression, "family": entry.family, "alpha": entry.alpha, "n": entry.n,
            "L_min": L_min, "expected": math.nan if entry.expected is None else entry.expected,
            "seminorm": oracle, "error": error, "status": status(ok),
        })
    if rows:
        ctx.writer.table("regularity_certificates", CERTIFY_COLUMNS, rows)
