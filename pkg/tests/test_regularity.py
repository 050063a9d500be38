import math

import numpy as np
import pytest

from mide_lab.errors import InvalidInputError, UnfitTableError
from mide_lab.grid import Geometry, GridFunction
from mide_lab.regularity import (
    Prediction,
    RegimeKind,
    certify,
    certify_trajectory,
    fit_exponent,
    modulus,
    predicted_regularity,
    regularity_experiment,
    seminorm,
    witness_maximum,
)
from mide_lab.solver import Trajectory, toy_model


def cosine(n, d=1):
    return GridFunction.from_function(Geometry(d, 0, n), lambda c: np.cos(2 * np.pi * c[0]))


def test_modulus_of_cosine():
    report = modulus(cosine(64))
    assert report.at(0.25) == pytest.approx(math.sqrt(2))
    assert report.at(0.5) == pytest.approx(2.0)
    assert report.at(0.0) == 0.0
    assert np.all(np.diff(report.omega) >= 0.0)


def test_modulus_of_constant_has_no_fit():
    report = modulus(GridFunction.constant(Geometry(1, 0, 32), 3.0))
    assert np.all(report.omega == 0.0)
    assert math.isnan(report.alpha)
    with pytest.raises(UnfitTableError):
        fit_exponent(report, 4 * report.h, 0.1)


def test_partial_modulus_ignores_frozen_block():
    g = Geometry(1, 1, 32)
    u = GridFunction.from_function(g, lambda c: np.cos(2 * np.pi * c[1]))
    assert np.all(modulus(u, 1, fit=False).omega == 0.0)
    assert modulus(u, 2, fit=False).at(0.5) == pytest.approx(2.0)


def test_smooth_field_fits_exponent_one():
    report = modulus(cosine(256))
    assert report.alpha == pytest.approx(1.0, abs=0.05)
    assert report.fit_range == (4 / 256, 0.1)


def test_fit_window_bounds():
    report = modulus(cosine(64), fit=False)
    with pytest.raises(UnfitTableError):
        fit_exponent(report, 0.1, 0.05)
    with pytest.raises(InvalidInputError):
        fit_exponent(report, 0.0, 0.05)


def test_full_direction_limit_in_two_dimensions():
    with pytest.raises(InvalidInputError):
        modulus(GridFunction.constant(Geometry(1, 1, 256), 0.0))


@pytest.mark.parametrize("alpha,expected", [(1.0, 2 * math.pi), (0.5, 3.017)])
def test_certified_seminorm_of_cosine(alpha, expected):
    certificate = certify(cosine(1024), "holder", alpha)
    assert certificate.L_min == pytest.approx(expected, rel=2e-3)
    lo, hi = certificate.bracket
    assert lo <= certificate.L_min <= hi * (1 + 1e-9)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0])
def test_certificate_agrees_with_double_loop(alpha):
    u = GridFunction.from_function(
        Geometry(1, 0, 64), lambda c: np.sin(2 * np.pi * c[0]) + 0.3 * np.cos(6 * np.pi * c[0])
    )
    assert certify(u, "holder", alpha).L_min == pytest.approx(seminorm(u, alpha), rel=1e-12)


def random_smooth_field(seed):
    rng = np.random.default_rng(seed)
    d = 2 if seed % 5 == 0 else 1
    g = Geometry(d, 0, 16 if d == 2 else 32)
    modes = rng.integers(1, 4, size=(3, d))
    amplitudes = rng.normal(size=3)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)

    def f(c):
        return sum(
            a * np.cos(2 * np.pi * np.tensordot(k, c, axes=1) + p) for a, k, p in zip(amplitudes, modes, phases)
        )

    return GridFunction.from_function(g, f), float(rng.uniform(0.2, 1.0))


@pytest.mark.parametrize("seed", range(50))
def test_certificate_matches_pairwise_seminorm_on_random_fields(seed):
    u, alpha = random_smooth_field(seed)
    assert certify(u, "holder", alpha).L_min == pytest.approx(seminorm(u, alpha), rel=1e-12)


def test_certificate_outside_bracket_is_reported(mocker):
    logger = mocker.patch("mide_lab.regularity.log")
    certify(cosine(64), "holder", 1.0)
    logger.warning.assert_not_called()

    # a maximum that turns negative at L = 1 pins the bracket far below 2π
    mocker.patch(
        "mide_lab.regularity._doubling_maximum",
        side_effect=lambda table, phi, distances: 1.0 if phi.L < 1.0 else -1.0,
    )
    certificate = certify(cosine(64), "holder", 1.0)
    assert certificate.bracket[1] <= 1.0
    assert certificate.L_min > 6.0
    logger.warning.assert_called_once()


def test_witness_sits_on_the_threshold():
    u = cosine(64)
    certificate = certify(u, "holder", 0.5)
    assert witness_maximum(u, certificate) == pytest.approx(0.0, abs=1e-12)
    assert certificate.witness is not None


def test_constant_field_certifies_zero():
    certificate = certify(GridFunction.constant(Geometry(1, 0, 16), 1.0), "holder", 0.5)
    assert certificate.L_min == 0.0
    assert certificate.bisection_steps == 0


def test_lipschitz_family_needs_rho():
    with pytest.raises(InvalidInputError):
        certify(cosine(32), "lipschitz-regularized", 0.5)
    assert certify(cosine(32), "lipschitz-regularized", 0.5, rho=4.0).L_min > 0.0


def test_seminorm_alpha_range():
    with pytest.raises(InvalidInputError):
        seminorm(cosine(16), 0.0)


@pytest.mark.parametrize(
    "beta,k,kind,alpha_max",
    [
        (1.5, 1.0, RegimeKind.LIPSCHITZ, 1.0),
        (1.5, 1.5, RegimeKind.LIPSCHITZ, 1.0),
        (0.5, 0.25, RegimeKind.HOLDER, 1.0 / 3.0),
        (0.75, 0.0, RegimeKind.HOLDER, 0.75),
    ],
)
def test_predicted_regularity(beta, k, kind, alpha_max):
    prediction = predicted_regularity(beta, k)
    assert prediction.kind is kind
    assert prediction.alpha_max == pytest.approx(alpha_max)


@pytest.mark.parametrize("beta,k", [(0.5, 0.75), (1.5, 1.8)])
def test_uncharacterized_regimes(beta, k):
    prediction = predicted_regularity(beta, k)
    assert prediction.kind is RegimeKind.UNCHARACTERIZED
    assert math.isnan(prediction.alpha_max)


def test_prediction_validation():
    with pytest.raises(InvalidInputError):
        predicted_regularity(2.0, 0.0)
    with pytest.raises(InvalidInputError):
        Prediction.holder(1.5)


def test_toy_model_is_lipschitz_in_local_block():
    verdict = regularity_experiment(toy_model(16, beta=1.5), Prediction.lipschitz(), 1, tol=1e-8)
    assert verdict.passed
    assert set(verdict.reports) == {"1@16", "full@16", "1@32", "full@32"}
    record = verdict.to_record()
    assert record["prediction"] == "lipschitz"
    assert record["status"] == "PASS"
    assert record["profile_checked"] is False


def test_trajectory_certificate_takes_the_worst_snapshot():
    u = cosine(64)
    trajectory = Trajectory(np.array([0.0, 1.0]), [u, 2.0 * u])
    result = certify_trajectory(trajectory, "holder", 1.0)
    assert result.L_max == pytest.approx(2 * result.certificates[0].L_min)
    assert [row["t"] for row in result.to_rows()] == [0.0, 1.0]
