import math

import numpy as np
import pytest

from mide_lab.artifacts import ArtifactWriter, exit_status, failed_rows
from mide_lab.config import EXPERIMENT_KINDS, parse_experiment
from mide_lab.errors import ConfigError
from mide_lab.experiments import (
    EXPERIMENTS,
    RunContext,
    bound_row,
    check_row,
    prepare,
    run_experiment,
)
from mide_lab.tables import read_table


def run(raw, out_dir):
    config = parse_experiment(raw)
    prepare(config)
    ctx = RunContext(config, ArtifactWriter(out_dir), config.seed, config.jobs, config.tol_scale)
    run_experiment(ctx)
    return ctx


def statuses(path):
    return {row["status"] for row in read_table(path)}


def test_every_kind_is_registered():
    assert set(EXPERIMENTS) == set(EXPERIMENT_KINDS)
    assert all(experiment.description for experiment in EXPERIMENTS.values())


def test_check_rows():
    assert check_row("x", 1.01, 1.0, 0.02)["status"] == "PASS"
    assert check_row("x", 1.05, 1.0, 0.02)["status"] == "FAIL"
    assert check_row("zero", 1e-3, 0.0, 1e-2)["error"] == pytest.approx(1e-3)
    assert bound_row("b", 1.0 + 1e-10, 1.0, 1e-9)["status"] == "PASS"
    assert bound_row("b", 1.1, 1.0)["error"] == pytest.approx(0.1)


def test_trial_generators_are_reproducible(tmp_path):
    config = parse_experiment({"kind": "lemmas", "name": "rng", "seed": 5})
    ctx = RunContext(config, ArtifactWriter(tmp_path), 5)
    first = ctx.rng(0, 3).uniform(size=4)
    assert np.array_equal(first, ctx.rng(0, 3).uniform(size=4))
    assert not np.array_equal(first, ctx.rng(0, 4).uniform(size=4))
    assert not np.array_equal(first, ctx.rng(1, 3).uniform(size=4))


def test_threaded_map_keeps_order(tmp_path):
    config = parse_experiment({"kind": "lemmas", "name": "threads"})
    ctx = RunContext(config, ArtifactWriter(tmp_path), 0, jobs=4)
    assert ctx.map(lambda i: i * i, range(20)) == [i * i for i in range(20)]


LEMMAS = {
    "kind": "lemmas",
    "name": "small-lemmas",
    "seed": 11,
    "block_triples": 30,
    "convolutions": 30,
    "closed_forms": 10,
    "trace_pairs": 30,
}


def test_lemmas_pass(tmp_path):
    run(LEMMAS, tmp_path)
    assert failed_rows(tmp_path) == {
        "lemmas_block_extraction": 0,
        "lemmas_closed_form": 0,
        "lemmas_convolution": 0,
        "lemmas_trace_bound": 0,
    }
    assert exit_status(tmp_path) == 0


def test_lemmas_are_deterministic_across_workers(tmp_path):
    run(LEMMAS, tmp_path / "serial")
    run(LEMMAS | {"jobs": 3}, tmp_path / "threaded")
    for name in ("lemmas_block_extraction", "lemmas_convolution", "lemmas_trace_bound"):
        serial = (tmp_path / "serial" / f"{name}.csv").read_bytes()
        assert serial == (tmp_path / "threaded" / f"{name}.csv").read_bytes()


def test_conditions_rows(tmp_path):
    run(
        {
            "kind": "conditions",
            "name": "conditions",
            "subjects": [
                {"kernel": {"kind": "fractional", "beta": 1.0}, "jump": {"kind": "identity"}, "expect": {"M1": True, "J4": True}},
                {"kernel": {"kind": "embedded", "base": {"beta": 1.0}, "ambient_dim": 2, "support": [0]}, "expect": {"M2": False}},
            ],
            "cone_checks": [{"eta": 0.5, "delta": 0.5, "beta": 1.5}],
        },
        tmp_path,
    )
    rows = read_table(tmp_path / "conditions.csv")
    assert len(rows) == 3 + 5 + 3
    assert {row["status"] for row in rows} == {"PASS", "INFO"}
    assert statuses(tmp_path / "conditions_cone_mass.csv") == {"PASS"}


def test_zeroth_order_solve(tmp_path):
    run(
        {
            "kind": "solve",
            "name": "reaction",
            "equation": {
                "form": "terms",
                "d1": 1,
                "d2": 0,
                "n": 16,
                "terms": [{"type": "zeroth-order", "c": 4.0}],
                "forcing": "cos(2*pi*x1)",
            },
            "tol": 1e-10,
            "mode_check": {"mode": [1], "value": 0.25, "rtol": 1e-6},
            "check_comparison_bound": True,
        },
        tmp_path,
    )
    checks = read_table(tmp_path / "solve_checks.csv")
    assert [row["check"] for row in checks] == ["solve_converged", "mode_amplitude[1]", "comparison_bound"]
    assert statuses(tmp_path / "solve_checks.csv") == {"PASS"}
    assert (tmp_path / "solution.grid").exists()
    assert (tmp_path / "solve_convergence.csv").exists()


def test_unconverged_solve_is_a_failed_row(tmp_path):
    run(
        {
            "kind": "solve",
            "name": "short",
            "equation": {"form": "catalogue", "catalogue": "toy-model", "n": 16},
            "tol": 1e-12,
            "max_steps": 5,
        },
        tmp_path,
    )
    assert failed_rows(tmp_path)["solve_checks"] == 1
    assert not (tmp_path / "solution.grid").exists()


def test_comparison_bound_needs_reaction_term():
    config = parse_experiment(
        {
            "kind": "solve",
            "name": "toy",
            "equation": {"form": "catalogue", "catalogue": "toy-model", "n": 16},
            "check_comparison_bound": True,
        }
    )
    with pytest.raises(ConfigError):
        prepare(config)


def test_isaacs_needs_controls():
    config = parse_experiment(
        {"kind": "isaacs", "name": "plain", "equation": {"form": "catalogue", "catalogue": "toy-model", "n": 16}}
    )
    with pytest.raises(ConfigError):
        prepare(config)


def test_parabolic_initial_condition_dimension():
    config = parse_experiment(
        {
            "kind": "parabolic",
            "name": "heat",
            "equation": {"form": "catalogue", "catalogue": "fractional-heat", "n": 16},
            "u0": "cos(2*pi*x2)",
            "T": 0.01,
            "dt": 1e-4,
        }
    )
    with pytest.raises(ConfigError):
        prepare(config)


def test_fractional_heat_run(tmp_path):
    run(
        {
            "kind": "parabolic",
            "name": "heat",
            "equation": {"form": "catalogue", "catalogue": "fractional-heat", "n": 32},
            "u0": "cos(2*pi*x1)",
            "T": 0.01,
            "dt": 1e-4,
            "snapshots": 2,
            "decay_check": {"mode": [1], "value": math.exp(-2 * math.pi**2 * 0.01), "rtol": 1e-3},
            "certify_alpha": 0.5,
        },
        tmp_path,
    )
    assert statuses(tmp_path / "parabolic_checks.csv") == {"PASS"}
    assert len(read_table(tmp_path / "parabolic_trajectory.csv")) == 3
    certificates = read_table(tmp_path / "parabolic_certificates.csv")
    assert certificates[-1]["L_min"] < certificates[0]["L_min"]


def test_isaacs_run(tmp_path):
    run(
        {
            "kind": "isaacs",
            "name": "isaacs",
            "equation": {
                "form": "catalogue",
                "catalogue": "isaacs-diffusion-control",
                "n": 16,
                "params": {"diffusions": [1.0, 2.0], "c": 10.0, "forcing": "cos(2*pi*x1)"},
            },
            "tol": 1e-9,
            "max_steps": 50000,
        },
        tmp_path,
    )
    checks = read_table(tmp_path / "isaacs_checks.csv")
    assert [row["check"] for row in checks] == [
        "isaacs_converged",
        "active_control_residual",
        "below_every_fixed_control",
    ]
    assert {row["status"] for row in checks} == {"PASS"}
    active = read_table(tmp_path / "isaacs_active_controls.csv")
    assert sum(row["points"] for row in active) == 16


def test_certify_only_regularity(tmp_path):
    run(
        {
            "kind": "regularity",
            "name": "certify",
            "certify": [
                {"expression": "cos(2*pi*x1)", "alpha": 0.5, "n": 64},
                {"expression": "cos(2*pi*x1)", "alpha": 1.0, "n": 256, "expected": 6.283185, "rtol": 2e-3},
            ],
        },
        tmp_path,
    )
    rows = read_table(tmp_path / "regularity_certificates.csv")
    assert [row["status"] for row in rows] == ["PASS", "PASS"]
    assert rows[0]["L_min"] == pytest.approx(rows[0]["seminorm"])
    assert not (tmp_path / "regularity_verdict.csv").exists()


ESTIMATES = {
    "kind": "estimates",
    "name": "estimates",
    "instances": 3,
    "quadratic_instances": 0,
    "betas": [1.5],
    "dims": [1],
    "families": ["holder"],
    "sign_cases": 0,
}


def estimate_row(ctx, i, attempt, skip_attempts):
    if attempt < skip_attempts:
        return {"instance": i, "attempt": attempt, "notes": "degenerate maximum", "status": "SKIP"}
    return {"instance": i, "attempt": attempt, "lhs": -1.0, "rhs": 0.0, "status": "PASS"}


def test_degenerate_estimates_are_redrawn(tmp_path, mocker):
    mocker.patch(
        "mide_lab.experiments._estimate_instance",
        side_effect=lambda ctx, i, attempt: estimate_row(ctx, i, attempt, 2),
    )
    run(ESTIMATES, tmp_path)
    rows = read_table(tmp_path / "estimates_concave.csv")
    assert [(row["instance"], row["attempt"], row["status"]) for row in rows] == [
        (0, 2, "PASS"), (1, 2, "PASS"), (2, 2, "PASS")
    ]
    assert len(read_table(tmp_path / "estimates_skipped.csv")) == 6
    assert exit_status(tmp_path) == 0


def test_exhausted_redraws_fail_the_run(tmp_path, mocker):
    mocker.patch(
        "mide_lab.experiments._estimate_instance",
        side_effect=lambda ctx, i, attempt: estimate_row(ctx, i, attempt, 1000 if i == 1 else 0),
    )
    run(ESTIMATES, tmp_path)
    assert len(read_table(tmp_path / "estimates_concave.csv")) == 2
    checks = {row["check"]: row for row in read_table(tmp_path / "estimates_checks.csv")}
    assert checks["non_degenerate_instances"]["value"] == 2
    assert checks["non_degenerate_instances"]["status"] == "FAIL"
    assert exit_status(tmp_path) == 1


def test_levy_ito_instances_fit_the_middle_cone(tmp_path):
    run(ESTIMATES | {"instances": 2}, tmp_path)
    rows = read_table(tmp_path / "estimates_concave.csv")
    assert [row["operator"] for row in rows] == ["concave", "levy-ito"]
    for row in rows:
        assert row["status"] == "PASS"
        assert row["eta"] + row["delta0"] < 0.9
    assert statuses(tmp_path / "estimates_checks.csv") == {"PASS"}
