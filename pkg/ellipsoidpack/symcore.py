"""Symmetric matrices with the trace inner product.

A ``SymMatrix`` stores the packed upper triangle of an ``n x n`` symmetric
matrix. Its ``vector()`` coordinates scale off-diagonal entries by sqrt(2),
which is an isometry onto R^{n(n+1)/2}: the trace inner product Tr[AB] becomes
the plain dot product of coefficient vectors. Projectors in ``evolve`` are
built in these coordinates.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy import linalg

from ellipsoidpack.errors import DomainError, UsageError


# Relative pivot threshold for the positive-definiteness test.
PD_PIVOT_TOL = 1e-12

ArrayLike = Union[np.ndarray, list, tuple]


def packed_size(n: int) -> int:
    """Dimension n(n+1)/2 of the space of symmetric n x n matrices."""
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def _layout(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices, column indices and isometry weights of the packed layout."""
    rows, cols = np.triu_indices(n)
    weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
    rows.setflags(write=False)
    cols.setflags(write=False)
    weights.setflags(write=False)
    return rows, cols, weights


def _as_vector(x: ArrayLike, n: int, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (n,):
        raise UsageError(f"{name} must be a vector of length {n}, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Point of R^{n x n}_sym, stored as the packed upper triangle (row-major)."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        if int(self.n) < 2:
            raise UsageError(f"Dimension must be at least 2, got {self.n}")
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if coeffs.shape[0] != packed_size(self.n):
            raise UsageError(
                f"Expected {packed_size(self.n)} packed coefficients for n={self.n}, "
                f"got {coeffs.shape[0]}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_dense(cls, matrix: ArrayLike) -> "SymMatrix":
        """Build from a square array; the symmetric part is taken."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise UsageError(f"Expected a square matrix, got shape {m.shape}")
        n = m.shape[0]
        rows, cols, _ = _layout(n)
        sym = 0.5 * (m + m.T)
        return cls(n, sym[rows, cols])

    @classmethod
    def from_vector(cls, n: int, vector: ArrayLike) -> "SymMatrix":
        """Inverse of ``vector()``."""
        _, _, weights = _layout(n)
        return cls(n, np.asarray(vector, dtype=float) / weights)

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "SymMatrix":
        rows, cols, _ = _layout(n)
        return cls(n, np.where(rows == cols, float(scale), 0.0))

    @classmethod
    def zeros(cls, n: int) -> "SymMatrix":
        return cls(n, np.zeros(packed_size(n)))

    @classmethod
    def diag(cls, values: ArrayLike) -> "SymMatrix":
        return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

    def dense(self) -> np.ndarray:
        rows, cols, _ = _layout(self.n)
        m = np.zeros((self.n, self.n))
        m[rows, cols] = self.coeffs
        m[cols, rows] = self.coeffs
        return m

    def vector(self) -> np.ndarray:
        """Isometric coordinates: <A, B> = A.vector() @ B.vector()."""
        _, _, weights = _layout(self.n)
        return self.coeffs * weights

    def inner(self, other: "SymMatrix") -> float:
        return inner(self, other)

    def norm(self) -> float:
        """Frobenius norm, i.e. sqrt(<A, A>)."""
        return float(np.linalg.norm(self.vector()))

    def trace(self) -> float:
        rows, cols, _ = _layout(self.n)
        return float(self.coeffs[rows == cols].sum())

    def _check_same(self, other: "SymMatrix") -> None:
        if not isinstance(other, SymMatrix):
            raise UsageError(f"Expected SymMatrix, got {type(other).__name__}")
        if other.n != self.n:
            raise UsageError(f"Dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        self._check_same(other)
        return SymMatrix(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        self._check_same(other)
        return SymMatrix(self.n, self.coeffs - other.coeffs)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(self.n, -self.coeffs)

    def __mul__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(self.n, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(self.n, self.coeffs / float(scalar))

    def __repr__(self) -> str:
        return f"SymMatrix(n={self.n}, coeffs={np.array2string(self.coeffs, precision=6)})"


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Eigenvalues in nondecreasing order with an orthonormal eigenvector frame (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> SymMatrix:
        u = self.eigenvectors
        return SymMatrix.from_dense((u * self.eigenvalues) @ u.T)


def inner(a: SymMatrix, b: SymMatrix) -> float:
    """Trace inner product Tr[AB]."""
    a._check_same(b)
    return float(a.vector() @ b.vector())


def sym_tensor(x: ArrayLike, y: ArrayLike) -> SymMatrix:
    """Symmetrized tensor product (x⊗y + y⊗x)/2."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.ndim != 1 or xv.shape != yv.shape:
        raise UsageError(f"Vectors must share one dimension, got {xv.shape} and {yv.shape}")
    outer = np.outer(xv, yv)
    return SymMatrix.from_dense(0.5 * (outer + outer.T))


def quad_form(a: SymMatrix, x: ArrayLike) -> float:
    """Ax·x, i.e. <A, x⊗x>."""
    xv = _as_vector(x, a.n)
    return float(xv @ a.dense() @ xv)


def quad_forms(a: SymMatrix, points: ArrayLike) -> np.ndarray:
    """Row-wise Ax·x for a (k, n) array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, a.n)
    return np.einsum("ij,jk,ik->i", pts, a.dense(), pts)


def sym_product(a: SymMatrix, x: SymMatrix) -> SymMatrix:
    """Symmetric part of the matrix product A·X."""
    a._check_same(x)
    return SymMatrix.from_dense(a.dense() @ x.dense())


def dyson_increment(n: int, dt: float, rng: np.random.Generator) -> SymMatrix:
    """
    Increment of the standard Brownian motion in R^{n x n}_sym over time dt.

    In isometric coordinates the increment is N(0, dt·Id); hence diagonal
    entries have variance dt and off-diagonal entries variance dt/2.

    Args:
        n: Matrix dimension
        dt: Time increment, must be positive
        rng: Random stream

    Returns:
        Gaussian symmetric matrix
    """
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    g = rng.standard_normal(packed_size(n)) * np.sqrt(dt)
    return SymMatrix.from_vector(n, g)


def spectral_decomposition(a: SymMatrix) -> SpectralDecomp:
    values, vectors = linalg.eigh(a.dense())
    return SpectralDecomp(eigenvalues=values, eigenvectors=vectors)


def eigenvalues(a: SymMatrix) -> np.ndarray:
    return linalg.eigvalsh(a.dense())


def op_norm(a: SymMatrix) -> float:
    values = eigenvalues(a)
    return float(max(abs(values[0]), abs(values[-1])))


def min_eigenvalue(a: SymMatrix) -> float:
    return float(eigenvalues(a)[0])


def cholesky_factor(a: SymMatrix) -> np.ndarray:
    """
    Lower-triangular factor of a positive-definite matrix.

    Pivots below PD_PIVOT_TOL times the largest diagonal entry count as a
    failure; for positive-definite A that entry lies within a factor n of
    the operator norm.

    Raises:
        DomainError: If A is not positive-definite (carries the min eigenvalue)
    """
    m = a.dense()
    scale = float(np.max(np.abs(np.diag(m)))) if m.size else 0.0
    try:
        factor = linalg.cholesky(m, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        factor = None
    if factor is None or scale <= 0 or np.min(np.diag(factor)) ** 2 <= PD_PIVOT_TOL * scale:
        lam = min_eigenvalue(a) if np.all(np.isfinite(m)) else float("nan")
        raise DomainError(
            f"Matrix is not positive-definite (min eigenvalue {lam:.6g})",
            min_eigenvalue=lam,
        )
    return factor


def is_positive_definite(a: SymMatrix) -> bool:
    try:
        cholesky_factor(a)
    except DomainError:
        return False
    return True


def log_det(a: SymMatrix) -> float:
    """log det A via the Cholesky factor."""
    factor = cholesky_factor(a)
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def matrix_power(a: SymMatrix, alpha: float) -> SymMatrix:
    """A^alpha = U Λ^alpha Uᵀ for positive-definite A."""
    decomp = spectral_decomposition(a)
    lam = decomp.eigenvalues
    if lam[0] <= 0:
        raise DomainError(
            f"Matrix power requires a positive-definite matrix (min eigenvalue {lam[0]:.6g})",
            min_eigenvalue=float(lam[0]),
        )
    if alpha == 0:
        return SymMatrix.identity(a.n)
    u = decomp.eigenvectors
    return SymMatrix.from_dense((u * lam**alpha) @ u.T)
