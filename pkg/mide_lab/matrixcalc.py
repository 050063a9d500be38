"""Matrix machinery of the doubling argument: block inequality, sup/inf
convolution of quadratic forms and the trace estimate."""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from mide_lab.errors import DivergentConvolutionError, InvalidInputError

PSD_TOL = 1e-9
MAX_DIM = 16


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Symmetric matrix; the upper triangle of `entries` is canonical."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.array(self.entries, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"need a square matrix, got shape {m.shape}")
        if m.shape[0] > MAX_DIM:
            raise InvalidInputError(f"matrices beyond dimension {MAX_DIM} are not supported")
        m = np.triu(m) + np.triu(m, 1).T
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def zeros(cls, dim: int) -> "SymMatrix":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def outer(cls, axis) -> "SymMatrix":
        """â⊗â for the normalized axis."""
        a = unit(axis)
        return cls(np.outer(a, a))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigvalsh(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros(0)
        return np.linalg.eigvalsh(self.entries)

    def min_eig(self) -> float:
        values = self.eigvalsh()
        return float(values[0]) if len(values) else float("inf")

    def max_eig(self) -> float:
        values = self.eigvalsh()
        return float(values[-1]) if len(values) else float("-inf")

    def norm(self) -> float:
        """Spectral norm."""
        values = self.eigvalsh()
        return float(np.max(np.abs(values))) if len(values) else 0.0

    def trace(self) -> float:
        return float(np.trace(self.entries))

    def quadratic(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(z @ self.entries @ z)

    def leq(self, other: "SymMatrix", tol: float = PSD_TOL) -> bool:
        """PSD order self <= other."""
        return (other - self).min_eig() >= -tol

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.entries + other.entries)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.entries - other.entries)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self.entries)

    def __mul__(self, scale: float) -> "SymMatrix":
        return SymMatrix(self.entries * scale)

    __rmul__ = __mul__

    def allclose(self, other: "SymMatrix", atol: float) -> bool:
        return bool(np.max(np.abs(self.entries - other.entries), initial=0.0) <= atol)

    def to_text(self) -> str:
        """Stable text form, one row per line."""
        return "\n".join(" ".join(f"{v:.12e}" for v in row) for row in self.entries)


def unit(axis) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        raise InvalidInputError("axis must be nonzero")
    return a / norm


@dataclass(frozen=True, eq=False)
class BlockTriple:
    X: SymMatrix
    Y: SymMatrix
    Z: SymMatrix
    d1: int
    d2: int

    def __post_init__(self):
        d = self.d1 + self.d2
        if self.d1 < 0 or self.d2 < 0:
            raise InvalidInputError("block dimensions must be nonnegative")
        for name in ("X", "Y", "Z"):
            if getattr(self, name).dim != d:
                raise InvalidInputError(f"{name} has dimension {getattr(self, name).dim}, expected {d}")

    @property
    def dim(self) -> int:
        return self.d1 + self.d2


def _block_matrix(t: BlockTriple) -> np.ndarray:
    Z, X, Y = t.Z.entries, t.X.entries, t.Y.entries
    zero = np.zeros_like(Z)
    return np.block([[Z, -Z], [-Z, Z]]) - np.block([[X, zero], [zero, -Y]])


def check_block_inequality(t: BlockTriple) -> float:
    """Smallest eigenvalue of [[Z,-Z],[-Z,Z]] - diag(X,-Y); >= -1e-9 means it holds."""
    if t.dim == 0:
        return float("inf")
    return float(np.linalg.eigvalsh(_block_matrix(t))[0])


@dataclass(frozen=True)
class BlockExtraction:
    first: BlockTriple
    second: BlockTriple
    parent_margin: float
    first_margin: float
    second_margin: float


def _sub(m: SymMatrix, index: slice) -> SymMatrix:
    return SymMatrix(m.entries[index, index])


def extract_blocks(t: BlockTriple) -> BlockExtraction:
    """Split a block-diagonal triple into its d1 and d2 triples."""
    d1 = t.d1
    for name in ("X", "Y", "Z"):
        off = getattr(t, name).entries[:d1, d1:]
        if off.size and np.max(np.abs(off)) > 1e-12:
            raise InvalidInputError(f"{name} is not block-diagonal for the split ({t.d1}, {t.d2})")
    head, tail = slice(0, d1), slice(d1, t.dim)
    first = BlockTriple(_sub(t.X, head), _sub(t.Y, head), _sub(t.Z, head), d1, 0)
    second = BlockTriple(_sub(t.X, tail), _sub(t.Y, tail), _sub(t.Z, tail), t.d2, 0)
    return BlockExtraction(
        first=first,
        second=second,
        parent_margin=check_block_inequality(t),
        first_margin=check_block_inequality(first),
        second_margin=check_block_inequality(second),
    )


def sup_convolve(X: SymMatrix, eps: float) -> SymMatrix:
    """Matrix of z ↦ sup_ξ {Xξ·ξ - |z-ξ|²/ε}: eigenvalues λ ↦ λ/(1-ελ)."""
    if eps <= 0.0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    values, vectors = np.linalg.eigh(X.entries)
    if eps * values[-1] >= 1.0:
        raise DivergentConvolutionError(
            f"eps·λ_max = {eps * values[-1]:.6g} >= 1, the supremum is +inf"
        )
    mapped = values / (1.0 - eps * values)
    return SymMatrix((vectors * mapped) @ vectors.T)


def inf_convolve(Y: SymMatrix, eps: float) -> SymMatrix:
    """Matrix of z ↦ inf_ξ {Yξ·ξ + |z-ξ|²/ε}."""
    return -sup_convolve(-Y, eps)


def convolution_threshold(t: BlockTriple) -> float:
    """ε₀ = 1/max(‖X‖, ‖Y‖, 2‖Z‖)."""
    scale = max(t.X.norm(), t.Y.norm(), 2 * t.Z.norm())
    return float("inf") if scale == 0.0 else 1.0 / scale


def convolve_triple(t: BlockTriple, eps: float) -> BlockTriple:
    """(X^ε, Y_ε, Z^{2ε})."""
    return BlockTriple(
        sup_convolve(t.X, eps), inf_convolve(t.Y, eps), sup_convolve(t.Z, 2 * eps), t.d1, t.d2
    )


def _sup_value(X: np.ndarray, eps: float, z: np.ndarray) -> float:
    def negative(xi):
        r = z - xi
        return -(xi @ X @ xi - r @ r / eps)

    def gradient(xi):
        return -(2 * X @ xi + 2 * (z - xi) / eps)

    result = optimize.minimize(
        negative, z.copy(), jac=gradient, method="BFGS", options={"gtol": 1e-13, "maxiter": 1000}
    )
    return -float(result.fun)


def sup_convolve_direct(X: SymMatrix, eps: float) -> SymMatrix:
    """Sup-convolution by numerical maximization, polarized into a matrix."""
    if eps * X.max_eig() >= 1.0:
        raise DivergentConvolutionError("the supremum is +inf")
    d = X.dim
    basis = np.eye(d)
    diagonal = np.array([_sup_value(X.entries, eps, basis[i]) for i in range(d)])
    m = np.diag(diagonal)
    for i, j in itertools.combinations(range(d), 2):
        both = _sup_value(X.entries, eps, basis[i] + basis[j])
        m[i, j] = m[j, i] = 0.5 * (both - diagonal[i] - diagonal[j])
    return SymMatrix(m)


def sup_convolve_grid(X: SymMatrix, eps: float, z: np.ndarray, radius: float = 4.0, points: int = 801) -> float:
    """Brute-force sup_ξ {Xξ·ξ - |z-ξ|²/ε} over a ξ-grid (d = 1 or 2)."""
    z = np.asarray(z, dtype=float)
    ticks = np.linspace(-radius, radius, points)
    mesh = np.stack(np.meshgrid(*([ticks] * X.dim), indexing="ij"), axis=-1).reshape(-1, X.dim)
    values = np.einsum("ni,ij,nj->n", mesh, X.entries, mesh) - np.sum((z - mesh) ** 2, axis=1) / eps
    return float(np.max(values))


def conv_closed_form(alpha: float, omega: float, axis) -> SymMatrix:
    """(2/α)(I - (2ω/(1+ω)) â⊗â), the sup-convolution of (1/α)(I - ω â⊗â) at α/2."""
    if alpha <= 0.0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    if omega == -1.0:
        raise InvalidInputError("omega = -1 makes the closed form singular")
    a = unit(axis)
    return SymMatrix((2.0 / alpha) * (np.eye(len(a)) - (2 * omega / (1 + omega)) * np.outer(a, a)))


def doubling_matrix(alpha: float, omega: float, axis) -> SymMatrix:
    """Z = (1/α)(I - ω â⊗â)."""
    a = unit(axis)
    return SymMatrix((np.eye(len(a)) - omega * np.outer(a, a)) / alpha)


@dataclass(frozen=True)
class TraceBound:
    bound: float
    trace: float
    satisfied: bool
    margin: float


def trace_bound_check(X: SymMatrix, Y: SymMatrix, alpha: float, omega: float, axis) -> TraceBound:
    """trace(X - Y) <= -8(ω-1)/(α(1+ω)) for X, Y under conv_closed_form."""
    if not 1.0 <= omega < 2.0:
        raise InvalidInputError(f"omega must lie in [1, 2), got {omega}")
    W = conv_closed_form(alpha, omega, axis)
    margin = check_block_inequality(BlockTriple(X, Y, W, X.dim, 0))
    if margin < -PSD_TOL:
        raise InvalidInputError(f"(X, Y, W) violates the block inequality, margin {margin:.3e}")
    bound = -8.0 * (omega - 1.0) / (alpha * (1.0 + omega))
    trace = (X - Y).trace()
    return TraceBound(bound=bound, trace=trace, satisfied=trace <= bound + PSD_TOL, margin=margin)


def check_h1_inequality(X: SymMatrix, Y: SymMatrix, eps: float, omega: float, axis) -> tuple[float, float]:
    """Margins of -(1/ε)I <= diag(X,-Y) <= (1/ε)[[Z,-Z],[-Z,Z]], Z = I - ω â⊗â."""
    d = X.dim
    Z = np.eye(d) - omega * SymMatrix.outer(axis).entries
    zero = np.zeros((d, d))
    middle = np.block([[X.entries, zero], [zero, -Y.entries]])
    lower = np.linalg.eigvalsh(middle + np.eye(2 * d) / eps)[0]
    upper = np.linalg.eigvalsh(np.block([[Z, -Z], [-Z, Z]]) / eps - middle)[0]
    return float(lower), float(upper)


def radial_hessian(first: float, second: float, a) -> SymMatrix:
    """D²φ(|a|) = φ'(|a|)/|a| (I - â⊗â) + φ''(|a|) â⊗â."""
    a = np.asarray(a, dtype=float)
    r = np.linalg.norm(a)
    projector = SymMatrix.outer(a).entries
    return SymMatrix(first / r * (np.eye(len(a)) - projector) + second * projector)


def _positive_definite(rng: np.random.Generator, d: int, floor: float = 0.1) -> np.ndarray:
    q = rng.normal(size=(d, d))
    return q @ q.T / d + floor * np.eye(d)


def _semidefinite(rng: np.random.Generator, d: int) -> np.ndarray:
    q = rng.normal(size=(d, max(1, d // 2)))
    return q @ q.T / d


def _symmetric(rng: np.random.Generator, d: int) -> np.ndarray:
    m = rng.normal(size=(d, d))
    return (m + m.T) / 2


def _block_diag(*blocks: np.ndarray) -> np.ndarray:
    d = sum(b.shape[0] for b in blocks)
    out = np.zeros((d, d))
    start = 0
    for b in blocks:
        out[start : start + b.shape[0], start : start + b.shape[0]] = b
        start += b.shape[0]
    return out


def _under(W: np.ndarray, A: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """X = W - A, Y = W A⁻¹ W - W + P satisfy the block inequality against W."""
    return W - A, W @ np.linalg.solve(A, W) - W + P


def random_block_triple(
    rng: np.random.Generator, d1: int, d2: int, block_diagonal: bool = True
) -> BlockTriple:
    """A triple satisfying the block inequality by construction.

    With Z - X = A ≻ 0 the Schur complement condition reads Z + Y >= Z A⁻¹ Z.
    """
    if block_diagonal:
        parts = [(d, _symmetric(rng, d), _positive_definite(rng, d), _semidefinite(rng, d)) for d in (d1, d2) if d]
        W = _block_diag(*(p[1] for p in parts))
        A = _block_diag(*(p[2] for p in parts))
        P = _block_diag(*(p[3] for p in parts))
    else:
        d = d1 + d2
        W, A, P = _symmetric(rng, d), _positive_definite(rng, d), _semidefinite(rng, d)
    X, Y = _under(W, A, P)
    return BlockTriple(SymMatrix(X), SymMatrix(Y), SymMatrix(W), d1, d2)


def random_trace_pair(
    rng: np.random.Generator, alpha: float, omega: float, axis
) -> tuple[SymMatrix, SymMatrix]:
    """(X, Y) satisfying the block inequality against conv_closed_form(α, ω, â)."""
    W = conv_closed_form(alpha, omega, axis).entries
    d = W.shape[0]
    X, Y = _under(W, _positive_definite(rng, d), _semidefinite(rng, d))
    return SymMatrix(X), SymMatrix(Y)


def tight_trace_instance(alpha: float, omega: float, axis) -> tuple[SymMatrix, SymMatrix]:
    """X = -Y = 2 w_â â⊗â with w_â the axis eigenvalue of conv_closed_form; the
    trace bound holds with equality."""
    w_axis = (2.0 / alpha) * (1.0 - omega) / (1.0 + omega)
    X = 2.0 * w_axis * SymMatrix.outer(axis)
    return X, -X


def random_axis(rng: np.random.Generator, d: int) -> np.ndarray:
    return unit(rng.normal(size=d))
