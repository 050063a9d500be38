import math

import numpy as np
import pytest

from mide_lab.errors import InvalidInputError, QuadratureError
from mide_lab.grid import Geometry, GridFunction
from mide_lab.levy import fractional_kernel, identity_jump
from mide_lab.operators import (
    DEFAULT_OPERATOR_SETTINGS,
    OperatorSettings,
    SplitSpec,
    apply_nonlocal,
    eval_directional,
    eval_levy_ito,
    eval_local,
    eval_nonlocal,
    fractional_laplacian_spectral,
    fractional_symbol_constant,
    fractional_symbol_constant_closed_form,
    mode_amplitude,
)


def cos_x1(coords):
    return np.cos(2 * np.pi * coords[0])


@pytest.fixture(scope="module")
def cos_line():
    return GridFunction.from_function(Geometry(1, 0, 512), cos_x1)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5])
def test_symbol_constant_matches_closed_form(d, beta):
    rel = 1e-4 if d == 2 else 1e-6
    assert fractional_symbol_constant(d, beta) == pytest.approx(
        fractional_symbol_constant_closed_form(d, beta), rel=rel
    )


def test_symbol_constant_one_dimensional_half_laplacian():
    assert fractional_symbol_constant_closed_form(1, 1.0) == pytest.approx(math.pi)


def test_spectral_fractional_laplacian_of_cosine(cos_line):
    out = fractional_laplacian_spectral(cos_line, 1.0)
    assert np.allclose(out.values, 2 * np.pi**2 * cos_line.values, rtol=1e-6, atol=1e-8)


def test_spectral_acts_on_selected_block():
    g = Geometry(1, 1, 32)
    u = GridFunction.from_function(g, lambda c: np.cos(2 * np.pi * c[0]) * np.cos(4 * np.pi * c[1]))
    out = fractional_laplacian_spectral(u, 1.0, which=2)
    assert np.allclose(out.values, 4 * np.pi**2 * u.values, atol=1e-6)


def test_direct_quadrature_matches_symbol(cos_line):
    value = eval_nonlocal(fractional_kernel(1, 1.0), cos_line, np.array([0.0]), SplitSpec(0.5))
    assert value == pytest.approx(-2 * np.pi**2, rel=1e-2)


def test_identity_jump_changes_nothing(cos_line):
    kernel, split = fractional_kernel(1, 1.0), SplitSpec(0.5)
    x = np.array([0.1])
    plain = eval_nonlocal(kernel, cos_line, x, split)
    assert eval_levy_ito(identity_jump(1), kernel, cos_line, x, split) == pytest.approx(plain, rel=1e-12)


def test_directional_operator_on_product():
    g = Geometry(1, 1, 128)
    u = GridFunction.from_function(g, lambda c: np.cos(2 * np.pi * c[0]) * np.cos(2 * np.pi * c[1]))
    value = eval_directional(fractional_kernel(1, 1.0), u, np.zeros(2), 2, SplitSpec(0.5))
    assert value == pytest.approx(-2 * np.pi**2, rel=1e-2)


def test_directional_rejects_full_block():
    u = GridFunction.constant(Geometry(1, 1, 16), 1.0)
    with pytest.raises(InvalidInputError):
        eval_directional(fractional_kernel(2, 1.0), u, np.zeros(2), "full", SplitSpec(0.5))


def test_kernel_must_match_block():
    u = GridFunction.constant(Geometry(1, 1, 16), 1.0)
    with pytest.raises(InvalidInputError):
        eval_nonlocal(fractional_kernel(1, 1.0), u, np.zeros(2), SplitSpec(0.5))


@pytest.mark.parametrize("delta", [0.0, 1.0])
def test_split_radius_range(delta):
    with pytest.raises(InvalidInputError):
        SplitSpec(delta)


def test_apply_nonlocal_reports_failing_point(mocker):
    u = GridFunction.constant(Geometry(1, 0, 8), 1.0)
    mocker.patch("mide_lab.operators.eval_nonlocal", side_effect=QuadratureError("no convergence", 1.0, 0.5))
    with pytest.raises(QuadratureError, match=r"at lattice point \(0,\)"):
        apply_nonlocal(fractional_kernel(1, 1.0), u, SplitSpec(0.5))


def test_local_jet_of_cosine():
    g = Geometry(1, 1, 64)
    u = GridFunction.from_function(g, cos_x1)
    jet = eval_local(u, (0, 5))
    assert jet.trace_block1 == pytest.approx(-4 * np.pi**2, rel=2e-3)
    assert jet.trace_block2 == pytest.approx(0.0, abs=1e-9)
    assert jet.forward[0] < 0.0 < jet.backward[0] + 1e-12
    with pytest.raises(InvalidInputError):
        eval_local(u, (0,))


def test_mode_amplitude():
    g = Geometry(1, 1, 32)
    u = GridFunction.from_function(
        g, lambda c: 0.3 * np.cos(2 * np.pi * c[0]) * np.cos(4 * np.pi * c[1]) + 0.1
    )
    assert mode_amplitude(u, (1, 2)) == pytest.approx(0.3)
    assert mode_amplitude(u, (0, 0)) == pytest.approx(0.1)
    with pytest.raises(InvalidInputError):
        mode_amplitude(u, (1,))


@pytest.mark.parametrize("order", [1, 3])
def test_off_lattice_quadrature_in_both_interpolants(cos_line, order):
    x = np.array([0.1 + 0.3 / 512])
    value = eval_nonlocal(
        fractional_kernel(1, 1.0), cos_line, x, SplitSpec(0.5), settings=OperatorSettings(interpolation_order=order)
    )
    assert value == pytest.approx(-2 * np.pi**2 * np.cos(2 * np.pi * x[0]), rel=1e-2)


def test_multilinear_interpolation_is_the_default():
    assert DEFAULT_OPERATOR_SETTINGS.interpolation_order == 1


def test_split_radius_does_not_change_the_value_with_exact_gradient():
    u = GridFunction.from_function(Geometry(1, 0, 128), cos_x1)
    x = np.array([0.3])
    p = np.array([-2 * np.pi * np.sin(2 * np.pi * 0.3)])
    kernel = fractional_kernel(1, 1.0)
    values = [eval_nonlocal(kernel, u, x, SplitSpec(delta, p)) for delta in (0.05, 0.1, 0.2)]
    assert values[1] == pytest.approx(values[0], rel=1e-3)
    assert values[2] == pytest.approx(values[0], rel=1e-3)


def test_lattice_shift_of_the_function_shifts_the_operator():
    g = Geometry(1, 0, 128)
    a = np.random.default_rng(7).normal(size=3)
    u = GridFunction.from_function(
        g, lambda c: a[0] * np.cos(2 * np.pi * c[0]) + a[1] * np.sin(4 * np.pi * c[0]) + a[2] * np.cos(6 * np.pi * c[0])
    )
    shifted = u.with_values(np.roll(u.values, 5))
    kernel, split, x = fractional_kernel(1, 1.0), SplitSpec(0.25), np.array([0.3])
    assert eval_nonlocal(kernel, shifted, x + 5 * g.h, split) == pytest.approx(
        eval_nonlocal(kernel, u, x, split), abs=1e-10
    )


def test_lattice_shift_along_a_block_shifts_the_directional_operator():
    g = Geometry(1, 1, 32)
    a = np.random.default_rng(8).normal(size=2)
    u = GridFunction.from_function(
        g, lambda c: np.cos(2 * np.pi * c[0]) * (a[0] * np.sin(2 * np.pi * c[1]) + a[1] * np.cos(4 * np.pi * c[1]))
    )
    shifted = u.with_values(np.roll(u.values, 3, axis=1))
    kernel, split, x = fractional_kernel(1, 1.5), SplitSpec(0.25), np.array([0.4, 0.3])
    moved = x + np.array([0.0, 3 * g.h])
    assert eval_directional(kernel, shifted, moved, 2, split) == pytest.approx(
        eval_directional(kernel, u, x, 2, split), abs=1e-10
    )
