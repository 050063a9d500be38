"""Periodic lattice fields on the torus [0,1)^d with a two-block coordinate split."""

from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Literal

import numpy as np
from scipy import ndimage

from mide_lab.errors import InvalidInputError
from mide_lab.tables import read_table, write_table

Block = Literal[1, 2, "full"]

# a field evaluator receives stacked coordinates of shape (d, *grid)
Field = Callable[[np.ndarray], np.ndarray]

BINARY_MAGIC = b"MIDEGRID"
# index coordinates this close to an integer count as on the lattice plane
LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class Geometry:
    """Uniform periodic lattice with n points per axis.

    Axes 0..d1-1 hold the first coordinate block, axes d1..d-1 the second.
    """

    d1: int
    d2: int
    n: int

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0 or self.d1 + self.d2 < 1:
            raise InvalidInputError(
                f"block dimensions must be >= 0 with d >= 1, got ({self.d1}, {self.d2})"
            )
        if self.n < 8:
            raise InvalidInputError(f"need n >= 8 points per axis, got {self.n}")

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def axes(self, block: Block) -> tuple[int, ...]:
        """Array axes belonging to a coordinate block."""
        match block:
            case "full":
                return tuple(range(self.d))
            case 1:
                return tuple(range(self.d1))
            case 2:
                return tuple(range(self.d1, self.d))
            case _:
                raise InvalidInputError(f"block must be 1, 2 or 'full', got {block!r}")

    def coords(self) -> np.ndarray:
        """Lattice coordinates stacked along a leading axis, shape (d, *grid)."""
        ticks = np.arange(self.n) * self.h
        return np.stack(np.meshgrid(*([ticks] * self.d), indexing="ij"))

    def point(self, index) -> np.ndarray:
        return np.asarray(index, dtype=float) * self.h

    def index_of(self, point) -> tuple[int, ...]:
        """Nearest lattice index of a point, wrapped onto the torus."""
        idx = np.rint(np.asarray(point, dtype=float) * self.n).astype(int) % self.n
        return tuple(int(i) for i in np.atleast_1d(idx))

    def regrid(self, n: int) -> "Geometry":
        return Geometry(self.d1, self.d2, n)


def minimal_image(displacement: np.ndarray) -> np.ndarray:
    """Representative of a torus displacement with components in [-1/2, 1/2)."""
    displacement = np.asarray(displacement, dtype=float)
    return displacement - np.floor(displacement + 0.5)


def torus_distance(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.linalg.norm(minimal_image(np.asarray(x) - np.asarray(y))))


def _centered_gradient(values: np.ndarray, h: float) -> np.ndarray:
    return np.stack(
        [
            (np.roll(values, -1, axis=i) - np.roll(values, 1, axis=i)) / (2 * h)
            for i in range(values.ndim)
        ]
    )


def _hessian(values: np.ndarray, h: float) -> np.ndarray:
    d = values.ndim
    hess = np.empty((d, d) + values.shape)
    for i in range(d):
        plus = np.roll(values, -1, axis=i)
        minus = np.roll(values, 1, axis=i)
        hess[i, i] = (plus - 2 * values + minus) / h**2
        for j in range(i + 1, d):
            mixed = (
                np.roll(plus, -1, axis=j)
                - np.roll(plus, 1, axis=j)
                - np.roll(minus, -1, axis=j)
                + np.roll(minus, 1, axis=j)
            ) / (4 * h**2)
            hess[i, j] = mixed
            hess[j, i] = mixed
    return hess


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real field sampled on every lattice point of a Geometry.

    Off-lattice values come from a periodic interpolant: multilinear by
    default, cubic B-spline with ``order=3``.
    """

    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.geometry.shape:
            raise InvalidInputError(
                f"values shape {values.shape} does not match geometry {self.geometry.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, geometry: Geometry, f: Field) -> "GridFunction":
        return cls(geometry, np.broadcast_to(f(geometry.coords()), geometry.shape))

    @classmethod
    def constant(cls, geometry: Geometry, value: float) -> "GridFunction":
        return cls(geometry, np.full(geometry.shape, float(value)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.geometry, values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values - other.values)

    def __mul__(self, scale: float) -> "GridFunction":
        return self.with_values(self.values * scale)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return self.with_values(-self.values)

    def at(self, index) -> float:
        wrapped = tuple(int(i) % self.geometry.n for i in np.atleast_1d(index))
        return float(self.values[wrapped])

    @cached_property
    def gradient_field(self) -> np.ndarray:
        """Centered-difference gradient, shape (d, *grid)."""
        return _centered_gradient(self.values, self.geometry.h)

    @cached_property
    def hessian_field(self) -> np.ndarray:
        """Second-difference Hessian, shape (d, d, *grid)."""
        return _hessian(self.values, self.geometry.h)

    @cached_property
    def _spline_coefficients(self) -> np.ndarray:
        return ndimage.spline_filter(self.values, order=3, mode="grid-wrap")

    def _index_coordinates(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.geometry.d:
            raise InvalidInputError(
                f"points must have {self.geometry.d} coordinates, got {points.shape[1]}"
            )
        return points.T * self.geometry.n

    def interpolate(self, points: np.ndarray, order: int = 1) -> np.ndarray:
        """Periodic interpolation at points of shape (N, d)."""
        coordinates = self._index_coordinates(points)
        match order:
            case 3:
                return ndimage.map_coordinates(
                    self._spline_coefficients,
                    coordinates,
                    order=3,
                    mode="grid-wrap",
                    prefilter=False,
                )
            case 1:
                return ndimage.map_coordinates(
                    self.values, coordinates, order=1, mode="grid-wrap"
                )
            case _:
                raise InvalidInputError(f"interpolation order must be 1 or 3, got {order}")

    def gradient_at(self, point: np.ndarray, order: int = 1) -> np.ndarray:
        """Centered-difference gradient, interpolated when off the lattice."""
        coordinates = self._index_coordinates(point)
        return np.array(
            [
                ndimage.map_coordinates(
                    component, coordinates, order=order, mode="grid-wrap"
                )[0]
                for component in self.gradient_field
            ]
        )

    def multilinear_gradient_at(self, point: np.ndarray) -> np.ndarray:
        """Exact gradient of the multilinear interpolant at one point.

        Component i is the difference of the interpolant across the cell
        containing the point along axis i. On a lattice plane normal to axis i
        the two adjacent cells are averaged, which is the centered difference.
        """
        g = self.geometry
        coordinates = self._index_coordinates(point)[:, 0]
        nearest = np.rint(coordinates)
        on_plane = np.abs(coordinates - nearest) <= LATTICE_TOL
        coordinates = np.where(on_plane, nearest, coordinates)
        lower = np.where(on_plane, nearest, np.floor(coordinates))

        # per axis: the point moved onto the planes lower - 1, lower, lower + 1
        stencil = np.repeat(coordinates[None, :], 3 * g.d, axis=0).reshape(g.d, 3, g.d)
        for i in range(g.d):
            stencil[i, :, i] = lower[i] + np.array([-1.0, 0.0, 1.0])
        below, at, above = ndimage.map_coordinates(
            self.values, stencil.reshape(-1, g.d).T, order=1, mode="grid-wrap"
        ).reshape(g.d, 3).T
        forward = (above - at) / g.h
        centered = (above - below) / (2 * g.h)
        return np.where(on_plane, centered, forward)

    def hessian_at(self, point: np.ndarray, order: int = 1) -> np.ndarray:
        coordinates = self._index_coordinates(point)
        d = self.geometry.d
        hess = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                hess[i, j] = hess[j, i] = ndimage.map_coordinates(
                    self.hessian_field[i, j], coordinates, order=order, mode="grid-wrap"
                )[0]
        return hess

    def to_bytes(self) -> bytes:
        """Binary form: magic, three little-endian uint32 (d1, d2, n), then
        row-major little-endian float64 values."""
        g = self.geometry
        header = BINARY_MAGIC + np.array([g.d1, g.d2, g.n], dtype="<u4").tobytes()
        return header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "GridFunction":
        if payload[: len(BINARY_MAGIC)] != BINARY_MAGIC:
            raise InvalidInputError("not a grid function payload")
        offset = len(BINARY_MAGIC)
        d1, d2, n = (int(v) for v in np.frombuffer(payload, "<u4", 3, offset))
        geometry = Geometry(d1, d2, n)
        values = np.frombuffer(payload, "<f8", offset=offset + 12)
        return cls(geometry, values.reshape(geometry.shape).astype(float))

    def write_binary(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def read_binary(cls, path: Path) -> "GridFunction":
        return cls.from_bytes(path.read_bytes())

    def _coordinate_columns(self) -> list[str]:
        g = self.geometry
        return [f"x1_{i + 1}" for i in range(g.d1)] + [f"x2_{i + 1}" for i in range(g.d2)]

    def write_csv(self, path: Path) -> Path:
        """One row per lattice point in row-major order: coordinates, then value."""
        names = self._coordinate_columns()
        columns = {name: float for name in names} | {"value": float}
        coords = self.geometry.coords().reshape(self.geometry.d, -1)
        rows = [
            dict(zip(names, coords[:, k].tolist()), value=v)
            for k, v in enumerate(self.values.ravel().tolist())
        ]
        return write_table(path, columns, rows)

    @classmethod
    def read_csv(cls, path: Path) -> "GridFunction":
        rows = read_table(path)
        if not rows:
            raise InvalidInputError(f"empty grid function table: {path}")
        d1 = sum(1 for name in rows[0] if name.startswith("x1_"))
        d2 = sum(1 for name in rows[0] if name.startswith("x2_"))
        n = round(len(rows) ** (1 / (d1 + d2)))
        geometry = Geometry(d1, d2, n)
        values = np.array([float(row["value"]) for row in rows])
        return cls(geometry, values.reshape(geometry.shape))
