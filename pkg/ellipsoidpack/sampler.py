"""Random lattices: exact Haar sampling for n = 2 and Hecke-point lattices for general n.

Exact2D draws the shape z = x + iy of a unimodular planar lattice from the
fundamental domain {|z| >= 1, |x| <= 1/2} of SL(2, Z) with the hyperbolic
density (3/pi) dx dy / y^2. Proposals come from the strip {|x| <= 1/2,
y >= sqrt(3)/2}, where the y-marginal is sampled exactly by the inverse CDF
y = (sqrt(3)/2) / u, so the only rejection is the condition |z| >= 1.

Hecke-point lattices L_a = {x in Z^n : x_n = sum a_i x_i mod p} with uniform
a are an approximate substitute for Haar-random lattices when n >= 3; they
equidistribute as p grows.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from ellipsoidpack.errors import ResourceError, UsageError
from ellipsoidpack.lattice import LatticeBasis, enumerate_in_ellipsoid, normalize_covolume
from ellipsoidpack.models import ShortVectorResult, SiegelResult
from ellipsoidpack.symcore import SymMatrix


logger = logging.getLogger("ellipsoidpack")

_STRIP_FLOOR = math.sqrt(3.0) / 2.0
_MAX_REJECTIONS = 10000


def vol_ball(n: int) -> float:
    """Volume pi^(n/2) / Gamma(n/2 + 1) of the unit ball in R^n."""
    if n < 1:
        raise UsageError(f"Dimension must be at least 1, got {n}")
    return float(math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0)))


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


def next_prime(m: int) -> int:
    """Smallest prime >= m."""
    p = max(2, int(m))
    while not is_prime(p):
        p += 1
    return p


def default_hecke_prime(n: int) -> int:
    return next_prime(n**4)


class SamplerVariant(str, Enum):
    """Available random-lattice samplers."""

    EXACT2D = "exact2d"
    HECKE = "hecke"


@dataclass(frozen=True)
class SamplerKind:
    """Sampler choice plus normalization target (defaults to Vol(B^n))."""

    variant: SamplerVariant
    p: Optional[int] = None
    target_covolume: Optional[float] = None

    @classmethod
    def exact2d(cls) -> "SamplerKind":
        return cls(SamplerVariant.EXACT2D)

    @classmethod
    def hecke(cls, p: Optional[int] = None) -> "SamplerKind":
        return cls(SamplerVariant.HECKE, p=p)

    @property
    def label(self) -> str:
        if self.variant == SamplerVariant.HECKE and self.p is not None:
            return f"hecke(p={self.p})"
        return self.variant.value

    def validate(self, n: int) -> None:
        """
        Check that this sampler can produce n-dimensional lattices.

        Raises:
            UsageError: Exact2D with n != 2, or a non-prime p
        """
        if n < 2:
            raise UsageError(f"Lattice dimension must be at least 2, got {n}")
        if self.variant == SamplerVariant.EXACT2D and n != 2:
            raise UsageError(f"Exact2D sampler only supports n = 2, got n = {n}")
        if self.variant == SamplerVariant.HECKE and self.p is not None:
            if not is_prime(self.p):
                raise UsageError(f"Hecke sampler requires a prime p, got {self.p}")
        if self.target_covolume is not None and not self.target_covolume > 0:
            raise UsageError(f"Target covolume must be positive, got {self.target_covolume}")

    def covolume_for(self, n: int) -> float:
        return self.target_covolume if self.target_covolume is not None else vol_ball(n)

    def prime_for(self, n: int) -> int:
        return self.p if self.p is not None else default_hecke_prime(n)


def sample_fundamental_domain(rng: np.random.Generator) -> Tuple[float, float]:
    """Draw (x, y) from the SL(2, Z) fundamental domain under (3/pi) dx dy / y^2."""
    for _ in range(_MAX_REJECTIONS):
        x = rng.random() - 0.5
        y = _STRIP_FLOOR / (1.0 - rng.random())
        if x * x + y * y >= 1.0:
            return x, y
    raise ResourceError(f"Fundamental-domain sampler rejected {_MAX_REJECTIONS} proposals")


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * math.pi)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def exact2d_lattice(rng: np.random.Generator) -> LatticeBasis:
    """Unimodular Haar-random planar lattice."""
    x, y = sample_fundamental_domain(rng)
    rows = np.array([[1.0, 0.0], [x, y]]) / math.sqrt(y)
    return LatticeBasis(rows @ _random_rotation(rng).T)


def hecke_lattice(n: int, p: int, a: Sequence[int]) -> LatticeBasis:
    """
    Basis of {x in Z^n : x_n = sum a_i x_i mod p}, covolume p.

    Rows are e_i + a_i e_n for i < n and p e_n.
    """
    if not is_prime(p):
        raise UsageError(f"Hecke lattice requires a prime p, got {p}")
    coeffs = [int(v) % p for v in a]
    if len(coeffs) != n - 1:
        raise UsageError(f"Expected {n - 1} residues, got {len(coeffs)}")
    rows = np.zeros((n, n))
    for i, ai in enumerate(coeffs):
        rows[i, i] = 1.0
        rows[i, n - 1] = float(ai)
    rows[n - 1, n - 1] = float(p)
    return LatticeBasis(rows)


def sample_lattice(n: int, kind: SamplerKind, rng: np.random.Generator) -> LatticeBasis:
    """
    Draw a random lattice normalized to the sampler's target covolume.

    Args:
        n: Dimension
        kind: Sampler choice
        rng: Random stream

    Returns:
        Lattice basis with covolume ``kind.covolume_for(n)``
    """
    kind.validate(n)
    if kind.variant == SamplerVariant.EXACT2D:
        lattice = exact2d_lattice(rng)
    else:
        p = kind.prime_for(n)
        a = rng.integers(0, p, size=n - 1)
        lattice = hecke_lattice(n, p, a)
    return normalize_covolume(lattice, kind.covolume_for(n))


@dataclass(frozen=True)
class RadialTestFunction:
    """
    Bounded radial function, piecewise constant in |x|.

    ``values[i]`` applies on [radii[i-1], radii[i]) with radii[-1] = 0;
    the function vanishes beyond the last radius.
    """

    radii: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        values = tuple(float(v) for v in self.values)
        if len(radii) != len(values):
            raise UsageError("Radial test function needs one value per radius")
        if any(r < 0 for r in radii):
            raise UsageError("Radii must be non-negative")
        if any(not math.isfinite(r) for r in radii):
            raise UsageError("Test function must have bounded support")
        if any(not math.isfinite(v) for v in values):
            raise UsageError("Test function must be bounded")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise UsageError("Radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)

    @classmethod
    def ball(cls, radius: float, height: float = 1.0) -> "RadialTestFunction":
        """Indicator (times ``height``) of the open ball of the given radius."""
        return cls((radius,), (height,))

    @classmethod
    def zero(cls) -> "RadialTestFunction":
        return cls((), ())

    @property
    def support_radius(self) -> float:
        nonzero = [r for r, v in zip(self.radii, self.values) if v != 0.0]
        return max(nonzero) if nonzero else 0.0

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if not self.radii:
            return np.zeros_like(r)
        padded = np.append(np.array(self.values), 0.0)
        return padded[np.searchsorted(np.array(self.radii), r, side="right")]

    def integral(self, n: int) -> float:
        """Integral over R^n by radial quadrature, piece by piece."""
        kappa = vol_ball(n)
        total = 0.0
        lower = 0.0
        for upper, value in zip(self.radii, self.values):
            if value != 0.0:
                piece, _ = integrate.quad(lambda r: n * r ** (n - 1), lower, upper)
                total += value * kappa * piece
            lower = upper
        return total


def lattice_sum(lattice: LatticeBasis, phi: RadialTestFunction) -> float:
    """Sum of phi(x) over nonzero lattice points."""
    radius = phi.support_radius
    if radius <= 0.0:
        return 0.0
    points = enumerate_in_ellipsoid(lattice, SymMatrix.identity(lattice.n), radius * radius)
    if not points:
        return 0.0
    norms = np.sqrt(np.array([p.norm_sq for p in points]))
    return float(np.sum(phi(norms)))


def siegel_mc(
    n: int,
    kind: SamplerKind,
    phi: RadialTestFunction,
    samples: int,
    rng: np.random.Generator,
) -> SiegelResult:
    """
    Monte Carlo check of the Siegel summation formula.

    Args:
        n: Dimension
        kind: Sampler choice
        phi: Bounded radial test function with bounded support
        samples: Number of sampled lattices (>= 2)
        rng: Random stream

    Returns:
        SiegelResult with the sample mean, its standard error, and the
        target (1/covolume) * integral of phi
    """
    kind.validate(n)
    if samples < 2:
        raise UsageError(f"siegel_mc needs at least 2 samples, got {samples}")

    sums = np.empty(samples)
    for i in range(samples):
        sums[i] = lattice_sum(sample_lattice(n, kind, rng), phi)

    target = phi.integral(n) / kind.covolume_for(n)
    result = SiegelResult(
        n=n,
        kind=kind.label,
        samples=samples,
        estimate=float(np.mean(sums)),
        se=float(np.std(sums, ddof=1) / math.sqrt(samples)),
        target=float(target),
    )
    logger.debug(
        f"Siegel MC n={n} kind={kind.label}: {result.estimate:.6g} ± {result.se:.3g} "
        f"(target {result.target:.6g})"
    )
    return result


def hecke_average(
    n: int, p: int, phi: RadialTestFunction, covolume: Optional[float] = None
) -> float:
    """
    Exact mean of the lattice sum of phi over all p^(n-1) normalized Hecke lattices.

    A nonzero x in Z^n lies in L_a for a fraction 1/p of the residue vectors
    when x_1..x_{n-1} are not all divisible by p; otherwise it lies in every
    L_a if p divides x_n and in none if not.
    """
    SamplerKind.hecke(p).validate(n)
    target = vol_ball(n) if covolume is None else float(covolume)
    radius = phi.support_radius
    if radius <= 0.0:
        return 0.0
    scale = (target / p) ** (1.0 / n)
    points = enumerate_in_ellipsoid(
        LatticeBasis(np.eye(n)), SymMatrix.identity(n), (radius / scale) ** 2
    )
    if not points:
        return 0.0
    coords = np.array([pt.coords for pt in points])
    generic = np.any(coords[:, :-1] % p != 0, axis=1)
    weights = np.where(generic, 1.0 / p, np.where(coords[:, -1] % p == 0, 1.0, 0.0))
    norms = scale * np.sqrt(np.sum(coords * coords, axis=1))
    return float(np.sum(weights * phi(norms)))


def short_vector_probability(
    n: int,
    kind: SamplerKind,
    samples: int,
    rng: np.random.Generator,
    radius: Optional[float] = None,
) -> ShortVectorResult:
    """
    Estimate P(some nonzero x has |x| < radius) for random lattices.

    The default radius is 1 - 1/n; by the Siegel formula the probability is
    at most radius^n, which is at most 1/e for the default.
    """
    kind.validate(n)
    if samples < 2:
        raise UsageError(f"short_vector_probability needs at least 2 samples, got {samples}")
    r = 1.0 - 1.0 / n if radius is None else float(radius)
    if not r > 0:
        raise UsageError(f"Radius must be positive, got {r}")

    scale = SymMatrix.identity(n, 1.0 / (r * r))
    hits = np.zeros(samples)
    for i in range(samples):
        lattice = sample_lattice(n, kind, rng)
        hits[i] = 1.0 if enumerate_in_ellipsoid(lattice, scale, 1.0) else 0.0

    covolume_ratio = vol_ball(n) / kind.covolume_for(n)
    return ShortVectorResult(
        n=n,
        kind=kind.label,
        samples=samples,
        radius=r,
        probability=float(np.mean(hits)),
        se=float(np.std(hits, ddof=1) / math.sqrt(samples)),
        siegel_bound=float(r**n * covolume_ratio),
    )
