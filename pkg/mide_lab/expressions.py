"""Coefficient fields, densities and jump maps written as sympy expressions."""

from dataclasses import dataclass, field

import numpy as np
import sympy
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from mide_lab.errors import ConfigError

FUNCTIONS = {
    name: getattr(sympy, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "Abs", "Min", "Max",
        "sign", "tanh", "cosh", "sinh", "atan", "floor",
    )
}
CONSTANTS = {"pi": sympy.pi, "E": sympy.E}

_GLOBALS = {
    "__builtins__": {},
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
    "Symbol": sympy.Symbol,
}


def coordinate_symbols(prefix: str, dim: int) -> list[sympy.Symbol]:
    return [sympy.Symbol(f"{prefix}{i + 1}", real=True) for i in range(dim)]


def parse(source: str | float, symbols: list[sympy.Symbol]) -> sympy.Expr:
    """Parse against a whitelist of functions and the given symbols only."""
    local = {s.name: s for s in symbols} | FUNCTIONS | CONSTANTS
    try:
        expr = parse_expr(str(source), local_dict=local, global_dict=_GLOBALS, transformations=standard_transformations)
    except (SyntaxError, TypeError, NameError, AttributeError) as error:
        raise ConfigError(f"cannot parse expression {source!r}: {error}") from error
    if not isinstance(expr, sympy.Expr):
        raise ConfigError(f"expression {source!r} is not a scalar expression")
    unknown = expr.free_symbols - set(symbols)
    if unknown:
        names = ", ".join(sorted(s.name for s in unknown))
        allowed = ", ".join(s.name for s in symbols) or "none"
        raise ConfigError(f"expression {source!r} uses unknown symbols {names}; allowed: {allowed}")
    undefined = expr.atoms(AppliedUndef)
    if undefined:
        raise ConfigError(f"expression {source!r} calls unknown functions {sorted(map(str, undefined))}")
    return expr


@dataclass(frozen=True)
class CoordinateExpression:
    """f(x1, ..., xd), called with stacked coordinates of shape (d, ...)."""

    source: str
    dim: int
    _function: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = coordinate_symbols("x", self.dim)
        expr = parse(self.source, symbols)
        object.__setattr__(self, "_function", sympy.lambdify(symbols, expr, "numpy"))

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        if coords.shape[0] != self.dim:
            raise ConfigError(f"{self.source!r} expects {self.dim} coordinates, got {coords.shape[0]}")
        values = self._function(*coords)
        return np.broadcast_to(np.asarray(values, dtype=float), coords.shape[1:])


@dataclass(frozen=True)
class DensityExpression:
    """Kernel density k(x, z) in x1..xd, z1..zd and r = |z|."""

    source: str
    dim: int
    _function: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = coordinate_symbols("x", self.dim) + coordinate_symbols("z", self.dim)
        symbols.append(sympy.Symbol("r", positive=True))
        expr = parse(self.source, symbols)
        object.__setattr__(self, "_function", sympy.lambdify(symbols, expr, "numpy"))

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        r = np.linalg.norm(z, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = self._function(*np.asarray(x, dtype=float), *z.T, r)
        values = np.broadcast_to(np.asarray(values, dtype=float), r.shape)
        return np.where(r > 0.0, values, np.inf)


@dataclass(frozen=True)
class JumpExpression:
    """Componentwise jump map j(x, z) in x1..xd and z1..zd."""

    sources: tuple[str, ...]
    _functions: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dim = len(self.sources)
        if dim == 0:
            raise ConfigError("a jump map needs at least one component")
        symbols = coordinate_symbols("x", dim) + coordinate_symbols("z", dim)
        functions = tuple(sympy.lambdify(symbols, parse(s, symbols), "numpy") for s in self.sources)
        object.__setattr__(self, "_functions", functions)

    @property
    def dim(self) -> int:
        return len(self.sources)

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        x = np.asarray(x, dtype=float)
        return np.stack(
            [np.broadcast_to(np.asarray(f(*x, *z.T), dtype=float), (len(z),)) for f in self._functions],
            axis=1,
        )


def coefficient(value: float | str, dim: int):
    """A constant stays a float; text becomes a coordinate expression."""
    match value:
        case bool():
            raise ConfigError(f"coefficient must be a number or an expression, got {value!r}")
        case int() | float():
            return float(value)
        case str():
            try:
                return float(value)
            except ValueError:
                return CoordinateExpression(value, dim)
    raise ConfigError(f"coefficient must be a number or an expression, got {value!r}")
