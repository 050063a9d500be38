import math

import numpy as np
import pytest

from mide_lab.errors import InvalidInputError
from mide_lab.estimates import (
    DoublingGeometry,
    TestFunctionPhi,
    concave_estimate_sides,
    directional_sign_analysis,
    holder_bound,
    levy_ito_concave_sides,
    lipschitz_geometry,
    locate_max,
    locate_quadratic_max,
    partial_locate_max,
    quadratic_bound,
    quadratic_estimate_sides,
    sign_change_ratio,
)
from mide_lab.grid import Geometry, GridFunction
from mide_lab.levy import fractional_kernel, identity_jump


def sin_x1(coords):
    return np.sin(2 * np.pi * coords[0])


@pytest.fixture(scope="module")
def sine_512():
    return GridFunction.from_function(Geometry(1, 0, 512), sin_x1)


@pytest.fixture(scope="module")
def sine_128():
    return GridFunction.from_function(Geometry(1, 0, 128), sin_x1)


def test_lipschitz_phi_needs_large_rho():
    with pytest.raises(InvalidInputError):
        TestFunctionPhi.lipschitz(1.0, 0.5, 1.0)


def test_lipschitz_phi_cap():
    phi = TestFunctionPhi.lipschitz(2.0, 0.5, 4.0)
    assert phi.t0 == pytest.approx((4.0 * 1.5) ** -2)
    assert phi.check_shape()
    assert float(phi.derivative(phi.t0 * 1.5)) == 0.0
    assert float(phi.value(10.0)) == pytest.approx(float(phi.value(phi.t0)))


def test_holder_phi_shape():
    phi = TestFunctionPhi.holder(3.0, 0.4)
    assert phi.check_shape()
    assert float(phi.value(0.25)) == pytest.approx(3.0 * 0.25**0.4)
    with pytest.raises(InvalidInputError):
        TestFunctionPhi.holder(-1.0, 0.4)
    with pytest.raises(InvalidInputError):
        TestFunctionPhi.holder(1.0, 1.5)


def test_doubling_geometry():
    geom = DoublingGeometry(np.array([0.3, 0.4]), 0.2, 0.1)
    assert geom.norm_a == pytest.approx(0.5)
    assert geom.delta == pytest.approx(0.05)
    assert geom.eta_tilde == pytest.approx(0.7 / 1.1)
    assert np.allclose(geom.a_hat, [0.6, 0.8])


@pytest.mark.parametrize(
    "a,eta,delta0",
    [([0.0], 0.2, 0.1), ([0.1], 0.0, 0.1), ([0.1], 0.6, 0.5)],
)
def test_doubling_geometry_rejects(a, eta, delta0):
    with pytest.raises(InvalidInputError):
        DoublingGeometry(np.array(a), eta, delta0)


def test_lipschitz_geometry_schedule():
    geom = lipschitz_geometry(np.array([0.25]), 0.5, 0.2)
    assert geom.delta0 == pytest.approx(0.5 * 0.2 / 2)
    assert geom.eta == pytest.approx(0.25 * 0.04 / 2)
    with pytest.raises(InvalidInputError):
        lipschitz_geometry(np.array([0.25]), 0.5, 0.3)


def test_doubling_maximum_of_sine(sine_512):
    # max of 2 sin(πs) - s sits where cos(πs) = 1/(2π)
    s = math.acos(1.0 / (2.0 * math.pi)) / math.pi
    point = locate_max(sine_512, sine_512, TestFunctionPhi.holder(1.0, 1.0))
    assert point.separation == pytest.approx(s, abs=4.0 / 512)
    assert point.value == pytest.approx(2.0 * math.sin(math.pi * s) - s, abs=1e-4)
    assert not point.degenerate


def test_constant_field_gives_degenerate_maximum():
    u = GridFunction.constant(Geometry(1, 0, 16), 1.0)
    point = locate_quadratic_max(u, 0.5)
    assert point.value == 0.0
    assert point.degenerate


def test_partial_maximum_penalizes_frozen_block():
    g = Geometry(1, 1, 32)
    u = GridFunction.from_function(g, lambda c: np.sin(2 * np.pi * c[0]) + np.sin(2 * np.pi * c[1]))
    point = partial_locate_max(u, 1, TestFunctionPhi.holder(1.0, 1.0), 0.01)
    assert point.a[1] == 0.0
    assert point.penalization_gap == 0.0
    assert point.block == 1
    with pytest.raises(InvalidInputError):
        partial_locate_max(u, "full", TestFunctionPhi.holder(1.0, 1.0), 0.01)


def test_concave_estimate_holds_on_sine(sine_128):
    kernel = fractional_kernel(1, 0.5)
    phi = TestFunctionPhi.holder(2.0, 0.4)
    point = locate_max(sine_128, sine_128, phi)
    geom = DoublingGeometry(point.a, 0.2, 0.2)
    sides = concave_estimate_sides(kernel, sine_128, sine_128, phi, geom, point)
    assert sides.holds
    assert sides.lhs < 0.0
    assert sides.terms["far_difference"] == 0.0


def test_concave_estimate_needs_matching_geometry(sine_128):
    phi = TestFunctionPhi.holder(2.0, 0.4)
    point = locate_max(sine_128, sine_128, phi)
    geom = DoublingGeometry(point.a + 0.1, 0.2, 0.2)
    with pytest.raises(InvalidInputError):
        concave_estimate_sides(fractional_kernel(1, 0.5), sine_128, sine_128, phi, geom, point)


def test_levy_ito_middle_cone_precondition(sine_128):
    phi = TestFunctionPhi.holder(2.0, 0.4)
    point = locate_max(sine_128, sine_128, phi)
    geom = DoublingGeometry(point.a, 0.2, 0.2)
    with pytest.raises(InvalidInputError, match="middle cone"):
        levy_ito_concave_sides(
            identity_jump(1), fractional_kernel(1, 0.5), sine_128, sine_128, phi, geom, point
        )


def test_quadratic_bound_identity_anchor():
    # 2·∫_{|z|<0.1} dz + 0.01·4 + 2·0.01·4
    bound = quadratic_bound(identity_jump(1), fractional_kernel(1, 1.0), 1.0, np.array([0.1]), 0.1)
    assert bound == pytest.approx(0.52, rel=1e-4)


def test_quadratic_bound_at_zero_separation():
    bound = quadratic_bound(identity_jump(1), fractional_kernel(1, 1.0), 1.0, np.array([0.0]), 0.1)
    assert bound == pytest.approx(0.4, rel=1e-6)
    with pytest.raises(InvalidInputError):
        quadratic_bound(identity_jump(1), fractional_kernel(1, 1.0), 0.0, np.array([0.1]), 0.1)


def test_quadratic_estimate_holds(sine_128):
    sides = quadratic_estimate_sides(identity_jump(1), fractional_kernel(1, 0.5), sine_128, 0.5, 0.5)
    assert sides.holds
    assert sides.terms["M"] > 0.0


def test_holder_bound_preconditions():
    kernel = fractional_kernel(1, 1.5)
    a = np.array([0.05])
    geom = DoublingGeometry(a, 0.01, 0.01)
    with pytest.raises(InvalidInputError, match="holder family"):
        holder_bound(kernel, TestFunctionPhi.lipschitz(100.0, 0.5, 4.0), a, geom)
    with pytest.raises(InvalidInputError, match="min"):
        holder_bound(fractional_kernel(1, 0.5), TestFunctionPhi.holder(100.0, 0.5, 0.25), a, geom)
    with pytest.raises(InvalidInputError, match="eta_tilde"):
        holder_bound(kernel, TestFunctionPhi.holder(100.0, 0.5, 0.25), a, DoublingGeometry(a, 0.3, 0.1))
    with pytest.raises(InvalidInputError, match="finite t0"):
        holder_bound(kernel, TestFunctionPhi.holder(100.0, 0.5), a, geom)
    with pytest.raises(InvalidInputError, match="must exceed"):
        holder_bound(kernel, TestFunctionPhi.holder(1.0, 0.5, 0.25), a, geom)


def test_holder_bound_turns_negative():
    kernel = fractional_kernel(1, 1.5)
    a = np.array([0.05])
    phi = TestFunctionPhi.holder(100.0, 0.5, 0.25)
    report = holder_bound(kernel, phi, a, DoublingGeometry(a, 0.01, 0.01))
    assert report.constants["C_cone"] == pytest.approx(4.0, rel=1e-4)
    assert report.exponent == pytest.approx(-1.0)
    assert report.o_term == 0.0
    assert report.value < 0.0
    # with exponent -1 the bound crosses zero at L·leading/O
    assert report.threshold == pytest.approx(phi.L * report.leading / report.O_term, rel=1e-6)


def test_sign_change_ratio():
    assert sign_change_ratio(lambda q: 1.0 - 4.0 * q**2) == pytest.approx(0.5, abs=1e-8)
    assert math.isnan(sign_change_ratio(lambda q: 1.0 + q))


def test_local_trace_mechanism():
    report = directional_sign_analysis(np.array([1.0]), np.array([0.0]), 0.5, 1.0, 0.5)
    assert report.mechanism == "local"
    assert report.trace_threshold == pytest.approx(2.0 / 3.0)
    assert report.bisected_trace_ratio == pytest.approx(2.0 / 3.0, abs=1e-8)
    assert math.isnan(report.bisected_nonlocal_ratio)
    assert report.in_certified_sector


def test_nonlocal_mechanism():
    report = directional_sign_analysis(np.array([0.0]), np.array([1.0]), 0.5, 1.0, 0.9)
    assert report.mechanism == "nonlocal"
    assert report.nonlocal_threshold == pytest.approx(1.0 / (0.81 * 1.5))
    assert report.bisected_nonlocal_ratio == pytest.approx(report.nonlocal_threshold, abs=1e-8)


def test_balanced_separation_has_no_mechanism():
    report = directional_sign_analysis(np.array([1.0]), np.array([1.0]), 0.5, 1.0, 0.5)
    assert report.mechanism == "none"
    assert not report.in_certified_sector
    with pytest.raises(InvalidInputError):
        directional_sign_analysis(np.array([0.0]), np.array([0.0]), 0.5, 1.0, 0.5)
