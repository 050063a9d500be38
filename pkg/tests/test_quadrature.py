import math

import numpy as np
import pytest

from mide_lab.errors import InvalidInputError
from mide_lab.quadrature import (
    QuadratureResult,
    QuadratureSettings,
    Region,
    angular_rule,
    pairwise_sum,
    product_rule,
    radial_rule,
)


@pytest.mark.parametrize("beta", [0.3, 1.0, 1.7])
def test_radial_rule_integrates_compensated_power(beta):
    # ∫_0^1 r^2 r^(-1-beta) dr = 1/(2-beta)
    r, w = radial_rule(0.0, 1.0, 8, beta=beta, levels=6)
    assert np.sum(w * r ** (1.0 - beta)) == pytest.approx(1.0 / (2.0 - beta), rel=1e-9)


@pytest.mark.parametrize("beta", [0.5, 1.5])
def test_radial_rule_tail(beta):
    r, w = radial_rule(1.0, math.inf, 8, beta=beta, levels=6)
    assert np.sum(w * r ** (-1.0 - beta)) == pytest.approx(1.0 / beta, rel=1e-8)


def test_radial_rule_rejects_bad_range():
    with pytest.raises(InvalidInputError):
        radial_rule(1.0, 0.5, 8, beta=1.0, levels=4)
    with pytest.raises(InvalidInputError):
        radial_rule(0.0, math.inf, 8, beta=1.0, levels=4)


def test_max_cell_splits_cells():
    r_coarse, _ = radial_rule(0.5, 1.0, 4, beta=1.0, levels=4)
    r_fine, w_fine = radial_rule(0.5, 1.0, 4, beta=1.0, levels=4, max_cell=0.06)
    assert len(r_fine) == 9 * len(r_coarse)
    assert np.sum(w_fine) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "dim,area",
    [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)],
)
def test_angular_rule_surface_area(dim, area):
    _, weights = angular_rule(dim, 16)
    assert np.sum(weights) == pytest.approx(area)


def test_cone_and_complement_partition_the_circle():
    axis = np.array([1.0, 1.0])
    cos_min = 0.6
    dirs, cone = angular_rule(2, 48, Region.CONE, axis, cos_min)
    _, rest = angular_rule(2, 48, Region.CONE_COMPLEMENT, axis, cos_min)
    assert np.sum(cone) + np.sum(rest) == pytest.approx(2 * math.pi)
    assert np.all(np.abs(dirs @ (axis / np.linalg.norm(axis))) >= cos_min - 1e-12)


@pytest.mark.parametrize("cos_min", [0.0, 0.5, 1.0])
def test_line_cones_cover_both_directions(cos_min):
    axis = np.array([1.0])
    dirs, weights = angular_rule(1, 8, Region.CONE, axis, cos_min)
    assert dirs.ravel().tolist() == [-1.0, 1.0]
    assert np.sum(weights) == 2.0
    dirs, weights = angular_rule(1, 8, Region.CONE_COMPLEMENT, axis, cos_min)
    assert dirs.shape == (0, 1)
    assert weights.size == 0


def test_polar_caps_area():
    axis = np.array([0.0, 0.0, 1.0])
    _, weights = angular_rule(3, 16, Region.CONE, axis, 0.5)
    # two caps of height 1/2 each
    assert np.sum(weights) == pytest.approx(2 * math.pi)


def test_angular_rule_dimension_limit():
    with pytest.raises(InvalidInputError):
        angular_rule(4, 8)


def test_product_rule_ball_volume():
    rule = product_rule(2, radial_rule(0.0, 1.0, 8, beta=1.0, levels=3), angular_rule(2, 32))
    area = np.sum(rule.weights)
    assert area == pytest.approx(math.pi, rel=1e-6)


def test_pairwise_sum_is_order_stable():
    values = np.linspace(0.0, 1.0, 1001)
    assert pairwise_sum(values) == pytest.approx(np.sum(values))
    assert pairwise_sum(np.array([])) == 0.0


def test_result_tolerance():
    settings = QuadratureSettings(rtol=1e-3, atol=0.0)
    assert QuadratureResult(1.0, 5e-4).within(settings)
    assert not QuadratureResult(1.0, 5e-3).within(settings)
