import numpy as np
import pytest

from mide_lab.errors import ConfigError
from mide_lab.expressions import (
    CoordinateExpression,
    DensityExpression,
    JumpExpression,
    coefficient,
)


def test_coordinate_expression_broadcasts_over_grid():
    f = CoordinateExpression("cos(2*pi*x1)*sin(2*pi*x2)", 2)
    coords = np.stack(np.meshgrid([0.0, 0.25], [0.25, 0.5], indexing="ij"))
    expected = np.cos(2 * np.pi * coords[0]) * np.sin(2 * np.pi * coords[1])
    assert np.allclose(f(coords), expected)


def test_constant_expression_keeps_grid_shape():
    f = CoordinateExpression("2*pi", 1)
    assert f(np.zeros((1, 5))).shape == (5,)


def test_coordinate_expressions_hash_by_source():
    assert CoordinateExpression("x1", 1) == CoordinateExpression("x1", 1)
    assert len({CoordinateExpression("x1", 1), CoordinateExpression("x1", 1)}) == 1


@pytest.mark.parametrize(
    "source",
    [
        "x3",
        "y + 1",
        "__import__('os')",
        "foo(x1)",
        "x1 +",
    ],
)
def test_rejects_unknown_names_and_bad_syntax(source):
    with pytest.raises(ConfigError):
        CoordinateExpression(source, 2)


def test_wrong_coordinate_count():
    f = CoordinateExpression("x1 + x2", 2)
    with pytest.raises(ConfigError):
        f(np.zeros((1, 4)))


def test_density_expression_is_infinite_at_origin():
    k = DensityExpression("r**(-2)", 1)
    z = np.array([[0.0], [0.5], [-2.0]])
    values = k(np.array([0.1]), z)
    assert np.isinf(values[0])
    assert values[1:].tolist() == pytest.approx([4.0, 0.25])


def test_density_expression_sees_x_and_z():
    k = DensityExpression("(1 + x1)*Abs(z1)*r**(-3)", 1)
    assert k(np.array([1.0]), np.array([[0.5]]))[0] == pytest.approx(2 * 0.5 / 0.125)


def test_jump_expression_stacks_components():
    j = JumpExpression(("(1 + 0.1*x1)*z1", "z2"))
    z = np.array([[1.0, 2.0], [0.5, -1.0]])
    out = j(np.array([1.0, 0.0]), z)
    assert out.shape == (2, 2)
    assert np.allclose(out, [[1.1, 2.0], [0.55, -1.0]])
    assert j.dim == 2


def test_jump_expression_needs_components():
    with pytest.raises(ConfigError):
        JumpExpression(())


@pytest.mark.parametrize("value,expected", [(2, 2.0), (0.5, 0.5), ("1.5", 1.5)])
def test_numeric_coefficients_stay_floats(value, expected):
    assert coefficient(value, 1) == expected


def test_text_coefficient_becomes_expression():
    c = coefficient("1 + x1", 1)
    assert isinstance(c, CoordinateExpression)


def test_boolean_coefficient_rejected():
    with pytest.raises(ConfigError):
        coefficient(True, 1)
