import numpy as np
import pytest

from mide_lab.errors import InvalidInputError
from mide_lab.grid import Geometry, GridFunction, minimal_image, torus_distance


def cos_x1(coords):
    return np.cos(2 * np.pi * coords[0])


@pytest.fixture
def toy_geometry():
    return Geometry(1, 1, 16)


def test_geometry_blocks(toy_geometry):
    assert toy_geometry.d == 2
    assert toy_geometry.shape == (16, 16)
    assert toy_geometry.axes(1) == (0,)
    assert toy_geometry.axes(2) == (1,)
    assert toy_geometry.axes("full") == (0, 1)
    assert Geometry(2, 0, 8).axes(2) == ()


@pytest.mark.parametrize(
    "d1,d2,n",
    [(0, 0, 16), (-1, 1, 16), (1, 0, 4)],
)
def test_geometry_rejects_bad_shapes(d1, d2, n):
    with pytest.raises(InvalidInputError):
        Geometry(d1, d2, n)


def test_index_of_wraps():
    g = Geometry(1, 0, 8)
    assert g.index_of([1.0]) == (0,)
    assert g.index_of([-0.125]) == (7,)
    assert g.index_of([0.26]) == (2,)


def test_minimal_image_and_torus_distance():
    assert np.allclose(minimal_image([0.75, -0.6]), [-0.25, 0.4])
    assert torus_distance(np.array([0.05]), np.array([0.95])) == pytest.approx(0.1)


def test_grid_function_is_read_only(toy_geometry):
    u = GridFunction.constant(toy_geometry, 1.0)
    with pytest.raises(ValueError):
        u.values[0, 0] = 2.0


def test_grid_function_rejects_non_finite(toy_geometry):
    values = np.zeros(toy_geometry.shape)
    values[3, 3] = np.nan
    with pytest.raises(InvalidInputError):
        GridFunction(toy_geometry, values)


def test_spline_interpolation_reproduces_lattice_values():
    g = Geometry(1, 0, 32)
    u = GridFunction.from_function(g, cos_x1)
    points = g.coords().reshape(1, -1).T
    assert np.allclose(u.interpolate(points), u.values, atol=1e-12)


def test_spline_interpolation_off_lattice():
    g = Geometry(1, 0, 64)
    u = GridFunction.from_function(g, cos_x1)
    x = np.array([[0.1234], [0.777]])
    assert np.allclose(u.interpolate(x, order=3), np.cos(2 * np.pi * x[:, 0]), atol=1e-5)
    assert np.allclose(u.interpolate(x, order=1), np.cos(2 * np.pi * x[:, 0]), atol=5e-3)


def test_finite_difference_derivatives():
    g = Geometry(1, 0, 128)
    u = GridFunction.from_function(g, cos_x1)
    x = g.coords()[0]
    assert np.allclose(u.gradient_field[0], -2 * np.pi * np.sin(2 * np.pi * x), atol=1e-2)
    assert np.allclose(u.hessian_field[0, 0], -4 * np.pi**2 * np.cos(2 * np.pi * x), atol=0.1)


def test_binary_layout(tmp_path, toy_geometry):
    u = GridFunction.from_function(toy_geometry, lambda c: c[0] + 2 * c[1])
    payload = u.to_bytes()
    assert payload[:8] == b"MIDEGRID"
    assert np.frombuffer(payload, "<u4", 3, 8).tolist() == [1, 1, 16]
    assert len(payload) == 8 + 12 + 8 * 16 * 16

    path = u.write_binary(tmp_path / "u.grid")
    restored = GridFunction.read_binary(path)
    assert restored.geometry == toy_geometry
    assert np.array_equal(restored.values, u.values)


def test_from_bytes_rejects_foreign_payload():
    with pytest.raises(InvalidInputError):
        GridFunction.from_bytes(b"NOTAGRID" + bytes(12))


def test_csv_keeps_block_columns(tmp_path, toy_geometry):
    u = GridFunction.from_function(toy_geometry, lambda c: np.sin(2 * np.pi * c[1]))
    path = u.write_csv(tmp_path / "u.csv")
    header = path.read_text().splitlines()[0]
    assert header == "x1_1,x2_1,value"
    restored = GridFunction.read_csv(path)
    assert restored.geometry == toy_geometry
    assert np.allclose(restored.values, u.values)


def test_multilinear_gradient_is_cell_slope():
    g = Geometry(1, 0, 16)
    values = np.random.default_rng(3).normal(size=16)
    u = GridFunction(g, values)
    # inside cell [5, 6], and across the wrap from 15 to 0
    assert u.multilinear_gradient_at(np.array([5.4 / 16]))[0] == pytest.approx((values[6] - values[5]) * 16)
    assert u.multilinear_gradient_at(np.array([15.7 / 16]))[0] == pytest.approx((values[0] - values[15]) * 16)
    # lattice point: mean of both cells
    assert u.multilinear_gradient_at(np.array([5 / 16]))[0] == pytest.approx((values[6] - values[4]) * 8)


def test_multilinear_gradient_matches_interpolant_slope():
    g = Geometry(1, 1, 8)
    u = GridFunction(g, np.random.default_rng(4).normal(size=(8, 8)))
    x, eps = np.array([0.31, 0.62]), 1e-6
    slope = [
        (u.interpolate((x + eps * e)[None, :])[0] - u.interpolate((x - eps * e)[None, :])[0]) / (2 * eps)
        for e in np.eye(2)
    ]
    assert np.allclose(u.multilinear_gradient_at(x), slope, atol=1e-7)
