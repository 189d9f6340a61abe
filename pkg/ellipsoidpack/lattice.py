"""Lattice bases, reduction, and enumeration of lattice points inside ellipsoids."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from ellipsoidpack.errors import DomainError, ResourceError, UsageError
from ellipsoidpack.symcore import SymMatrix, cholesky_factor, quad_forms


logger = logging.getLogger("ellipsoidpack")

DEFAULT_ENUMERATION_CAP = 10**7
DEFAULT_EPS_CONTACT = 1e-9
NUMERIC_FREE_TOL = 1e-9
LLL_DELTA = 0.99

# Relative slack used while searching; candidates are filtered exactly afterwards.
_SEARCH_SLACK = 1e-9


class LatticeKind(str, Enum):
    """Named lattices available as fixtures."""

    ZN = "Zn"
    DN = "Dn"
    E8 = "E8"


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Full-rank lattice; rows of ``basis`` are the basis vectors."""

    basis: np.ndarray
    covolume: float = field(init=False)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise UsageError(f"Lattice basis must be a square matrix, got shape {b.shape}")
        if b.shape[0] < 2:
            raise UsageError(f"Lattice dimension must be at least 2, got {b.shape[0]}")
        if not np.all(np.isfinite(b)):
            raise DomainError("Lattice basis has non-finite entries")
        det = abs(float(np.linalg.det(b)))
        scale = float(np.prod(np.linalg.norm(b, axis=1)))
        if scale == 0.0 or det <= 1e-12 * scale:
            raise DomainError(f"Lattice basis is rank deficient (|det| = {det:.3g})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "covolume", det)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def gram(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def embed(self, coords: Sequence[int]) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self.basis

    def point(self, coords: Sequence[int]) -> "LatticePoint":
        return LatticePoint.from_coords(self, coords)

    def scaled(self, factor: float) -> "LatticeBasis":
        return LatticeBasis(self.basis * float(factor))

    def to_file(self, path: Union[str, Path], comment: Optional[str] = None) -> Path:
        """
        Write the basis as plain text (17 significant digits).

        Args:
            path: Output file
            comment: Optional comment line written after the header

        Returns:
            Path written
        """
        path = Path(path)
        lines = ["# ellipsoidpack lattice basis"]
        if comment:
            lines.extend(f"# {line}" for line in comment.splitlines())
        lines.append(str(self.n))
        for row in self.basis:
            lines.append(" ".join(f"{value:.17g}" for value in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "LatticeBasis":
        """
        Read a basis file written by ``to_file``.

        Raises:
            FileNotFoundError: If the file does not exist
            UsageError: If the file is malformed
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Lattice basis file not found: {path}")
        content = [
            line.strip()
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        if not content:
            raise UsageError(f"Lattice basis file is empty: {path}")
        try:
            n = int(content[0])
            rows = [[float(v) for v in line.split()] for line in content[1 : n + 1]]
        except ValueError as e:
            raise UsageError(f"Malformed lattice basis file {path}: {e}")
        if len(rows) != n or any(len(row) != n for row in rows) or len(content) != n + 1:
            raise UsageError(f"Lattice basis file {path} must hold exactly {n} rows of {n} reals")
        return cls(np.array(rows))


@dataclass(frozen=True)
class LatticePoint:
    """Lattice vector given by integer coordinates in the basis."""

    coords: Tuple[int, ...]
    embedding: np.ndarray = field(compare=False, repr=False)

    @classmethod
    def from_coords(cls, lattice: LatticeBasis, coords: Sequence[int]) -> "LatticePoint":
        c = tuple(int(v) for v in coords)
        if len(c) != lattice.n:
            raise UsageError(f"Expected {lattice.n} coordinates, got {len(c)}")
        emb = lattice.embed(c)
        emb.setflags(write=False)
        return cls(coords=c, embedding=emb)

    @property
    def norm_sq(self) -> float:
        return float(self.embedding @ self.embedding)

    @property
    def is_zero(self) -> bool:
        return not any(self.coords)

    def negated(self) -> "LatticePoint":
        emb = -self.embedding
        emb.setflags(write=False)
        return LatticePoint(coords=tuple(-v for v in self.coords), embedding=emb)

    def antipodal_key(self) -> Tuple[int, ...]:
        """Canonical key shared by x and -x."""
        neg = tuple(-v for v in self.coords)
        return max(self.coords, neg)

    def to_dict(self) -> dict:
        return {"coords": list(self.coords), "embedding": [float(v) for v in self.embedding]}


def _gram_schmidt(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = rows.shape[0]
    bstar = np.zeros_like(rows)
    mu = np.eye(n)
    for i in range(n):
        v = rows[i].copy()
        for j in range(i):
            mu[i, j] = (rows[i] @ bstar[j]) / (bstar[j] @ bstar[j])
            v -= mu[i, j] * bstar[j]
        bstar[i] = v
    return bstar, mu


def _lll_rows(rows: np.ndarray, delta: float = LLL_DELTA) -> Tuple[np.ndarray, np.ndarray]:
    """
    Floating-point LLL on the rows of ``rows``.

    Returns:
        (reduced rows, unimodular integer matrix U with reduced ≈ U @ rows)
    """
    b = np.array(rows, dtype=float)
    n = b.shape[0]
    u = np.eye(n, dtype=np.int64)
    bstar, mu = _gram_schmidt(b)
    norms = np.einsum("ij,ij->i", bstar, bstar)
    if np.any(norms <= 1e-24 * np.max(norms)):
        raise DomainError("Cannot reduce a rank-deficient basis")

    k = 1
    max_iterations = 100000 * n * n
    iterations = 0
    while k < n:
        iterations += 1
        if iterations > max_iterations:
            raise ResourceError(f"LLL did not terminate within {max_iterations} iterations")
        for j in range(k - 1, -1, -1):
            q = float(np.rint(mu[k, j]))
            if q != 0.0:
                b[k] -= q * b[j]
                u[k] -= int(q) * u[j]
                mu[k, :j] -= q * mu[j, :j]
                mu[k, j] -= q
        if norms[k] >= (delta - mu[k, k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            b[[k - 1, k]] = b[[k, k - 1]]
            u[[k - 1, k]] = u[[k, k - 1]]
            bstar, mu = _gram_schmidt(b)
            norms = np.einsum("ij,ij->i", bstar, bstar)
            k = max(k - 1, 1)
    return b, u


def lll_reduce(lattice: LatticeBasis, delta: float = LLL_DELTA) -> LatticeBasis:
    """
    LLL-reduce a basis.

    The reduced basis is formed as U @ basis with the integer transform U, so
    it spans exactly the same lattice.

    Args:
        lattice: Full-rank basis
        delta: Lovász parameter

    Returns:
        Reduced basis of the same lattice
    """
    _, u = _lll_rows(lattice.basis, delta)
    return LatticeBasis(u.astype(float) @ lattice.basis)


def _fincke_pohst(
    upper: np.ndarray,
    search_bound: float,
    accept,
    cap: int,
    stop_after: Optional[int],
) -> None:
    """
    Depth-first enumeration of integer vectors c with |R c|² <= search_bound.

    ``accept(c)`` decides whether a leaf counts toward the result; it returns
    True when the caller kept the point.
    """
    n = upper.shape[0]
    diag = np.diag(upper)
    ratios = upper / diag[:, None]
    coords = np.zeros(n, dtype=np.int64)
    found = [0]

    class _Stop(Exception):
        pass

    def descend(level: int, budget: float) -> None:
        center = -float(ratios[level, level + 1 :] @ coords[level + 1 :])
        width = np.sqrt(max(budget, 0.0)) / diag[level]
        width = width * (1.0 + _SEARCH_SLACK) + 1e-12
        lo = int(np.ceil(center - width))
        hi = int(np.floor(center + width))
        for value in range(lo, hi + 1):
            offset = value - center
            rest = budget - (diag[level] * offset) ** 2
            if rest < -_SEARCH_SLACK * search_bound:
                continue
            coords[level] = value
            if level == 0:
                if coords.any() and accept(coords):
                    found[0] += 1
                    if found[0] > cap:
                        raise ResourceError(
                            f"Enumeration exceeded the cap of {cap} lattice points"
                        )
                    if stop_after is not None and found[0] >= stop_after:
                        raise _Stop()
            else:
                descend(level - 1, rest)
        coords[level] = 0

    try:
        descend(n - 1, search_bound)
    except _Stop:
        pass


def _enumerate(
    lattice: LatticeBasis,
    a: SymMatrix,
    bound: float,
    cap: int = DEFAULT_ENUMERATION_CAP,
    stop_after: Optional[int] = None,
) -> List[Tuple[float, Tuple[int, ...]]]:
    if a.n != lattice.n:
        raise UsageError(f"Dimension mismatch: lattice n={lattice.n}, matrix n={a.n}")
    if not bound > 0:
        raise UsageError(f"Enumeration bound must be positive, got {bound}")
    chol = cholesky_factor(a)
    dense = a.dense()
    basis = lattice.basis

    # Reduce the basis in the metric of A so the search tree stays narrow.
    _, u = _lll_rows(basis @ chol)
    reduced = u.astype(float) @ basis @ chol
    upper = linalg.cholesky(reduced @ reduced.T, lower=False)

    results: List[Tuple[float, Tuple[int, ...]]] = []

    def accept(c: np.ndarray) -> bool:
        original = c @ u
        emb = np.asarray(original, dtype=float) @ basis
        value = float(emb @ dense @ emb)
        if value < bound:
            results.append((value, tuple(int(v) for v in original)))
            return True
        return False

    _fincke_pohst(upper, bound * (1.0 + _SEARCH_SLACK), accept, cap, stop_after)
    results.sort()
    return results


def enumerate_in_ellipsoid(
    lattice: LatticeBasis,
    a: SymMatrix,
    bound: float,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> List[LatticePoint]:
    """
    All nonzero lattice points x with Ax·x < bound (Fincke–Pohst).

    Args:
        lattice: Lattice basis
        a: Positive-definite quadratic form
        bound: Strict upper bound on Ax·x
        cap: Maximum number of points before a ResourceError

    Returns:
        Points sorted by quadratic form value, then by coordinates

    Raises:
        DomainError: If A is not positive-definite
        ResourceError: If more than ``cap`` points qualify
    """
    return [lattice.point(coords) for _, coords in _enumerate(lattice, a, bound, cap)]


def shortest_vector(lattice: LatticeBasis) -> LatticePoint:
    """A shortest nonzero vector (Euclidean norm)."""
    reduced = lll_reduce(lattice)
    bound = float(np.min(np.einsum("ij,ij->i", reduced.basis, reduced.basis)))
    points = _enumerate(lattice, SymMatrix.identity(lattice.n), bound * (1.0 + 1e-9))
    return lattice.point(points[0][1])


def is_free(lattice: LatticeBasis, a: SymMatrix, tol: float = 0.0) -> bool:
    """True if no nonzero lattice point satisfies Ax·x < 1 - tol."""
    bound = 1.0 - tol
    if bound <= 0:
        cholesky_factor(a)
        return True
    return not _enumerate(lattice, a, bound, stop_after=1)


def contact_points(
    lattice: LatticeBasis, a: SymMatrix, eps_contact: float = DEFAULT_EPS_CONTACT
) -> List[LatticePoint]:
    """Nonzero lattice points with |Ax·x - 1| <= eps_contact."""
    found = _enumerate(lattice, a, 1.0 + eps_contact * (1.0 + 1e-12))
    return [lattice.point(coords) for value, coords in found if abs(value - 1.0) <= eps_contact]


def named_lattice(kind: Union[LatticeKind, str], n: int) -> LatticeBasis:
    """
    Deterministic fixture lattices.

    Args:
        kind: Zn, Dn (n >= 3, covolume 2) or E8 (n = 8, covolume 1)
        n: Dimension

    Raises:
        UsageError: For an invalid (kind, n) pairing
    """
    try:
        kind = LatticeKind(kind)
    except ValueError:
        raise UsageError(f"Unknown lattice kind '{kind}' (expected Zn, Dn or E8)")
    if n < 2:
        raise UsageError(f"Lattice dimension must be at least 2, got {n}")

    if kind == LatticeKind.ZN:
        return LatticeBasis(np.eye(n))

    if kind == LatticeKind.DN:
        if n < 3:
            raise UsageError(f"Dn requires n >= 3, got {n}")
        rows = np.zeros((n, n))
        rows[0, 0] = rows[0, 1] = -1.0
        for i in range(1, n):
            rows[i, i - 1] = 1.0
            rows[i, i] = -1.0
        return LatticeBasis(rows)

    if n != 8:
        raise UsageError(f"E8 requires n = 8, got {n}")
    rows = np.zeros((8, 8))
    rows[0, 0] = 2.0
    for i in range(1, 7):
        rows[i, i - 1] = -1.0
        rows[i, i] = 1.0
    rows[7, :] = 0.5
    return LatticeBasis(rows)


def normalize_covolume(lattice: LatticeBasis, target: float) -> LatticeBasis:
    """Uniformly scale the basis so that its covolume equals ``target``."""
    if not target > 0:
        raise UsageError(f"Target covolume must be positive, got {target}")
    return lattice.scaled((target / lattice.covolume) ** (1.0 / lattice.n))


def minkowski_constant(lattice: LatticeBasis) -> float:
    """Volume bound 2^n·covolume for L-free origin-symmetric ellipsoids."""
    return 2.0**lattice.n * lattice.covolume


def contact_cap(n: int) -> int:
    """Maximum number 2(2^n - 1) of lattice points on the boundary of an L-free ellipsoid."""
    return 2 * (2**n - 1)


def pairwise_quad_forms(a: SymMatrix, points: Sequence[LatticePoint]) -> np.ndarray:
    """Ax·x for each point; empty input gives an empty array."""
    if not points:
        return np.zeros(0)
    return quad_forms(a, np.stack([p.embedding for p in points]))
