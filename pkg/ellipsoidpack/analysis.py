"""Closed-form quantities, bound checks, and ensemble statistics."""

import logging
import math
from functools import lru_cache
from typing import TYPE_CHECKING, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize
from scipy.special import erfc

from ellipsoidpack.errors import DomainError, UsageError
from ellipsoidpack.lattice import (
    NUMERIC_FREE_TOL,
    LatticeBasis,
    LatticePoint,
    enumerate_in_ellipsoid,
    is_free,
    minkowski_constant,
)
from ellipsoidpack.models import DensityReport, EnsembleSummary, ShellIntegralResult, StepEvent
from ellipsoidpack.sampler import vol_ball
from ellipsoidpack.symcore import (
    SymMatrix,
    dyson_increment,
    inner,
    log_det,
    matrix_power,
    op_norm,
    spectral_decomposition,
    sym_tensor,
)

if TYPE_CHECKING:
    from ellipsoidpack.evolve import ConstraintProjector, Trajectory


logger = logging.getLogger("ellipsoidpack")

DEFAULT_C0 = 2.0
ENSEMBLE_GRID_POINTS = 512
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def phi(r: float) -> float:
    """min(1/2, exp(-r²/2) / (sqrt(2π) r)), with phi(0) = 1/2."""
    if r < 0:
        raise UsageError(f"phi is defined for r >= 0, got {r}")
    if r == 0:
        return 0.5
    return min(0.5, math.exp(-0.5 * r * r) / (_SQRT_2PI * r))


@lru_cache(maxsize=1)
def phi_knee() -> float:
    """Point where the exponential branch of phi drops to 1/2."""
    return float(
        optimize.brentq(lambda r: math.exp(-0.5 * r * r) / (_SQRT_2PI * r) - 0.5, 0.1, 2.0)
    )


def gaussian_tail(r: float) -> float:
    """P(Z >= r) for a standard normal Z."""
    return float(0.5 * erfc(r / math.sqrt(2.0)))


def _norm_sq(x: Union[LatticePoint, Sequence[float], np.ndarray]) -> float:
    if isinstance(x, LatticePoint):
        return x.norm_sq
    v = np.asarray(x, dtype=float)
    return float(v @ v)


def hitting_bound(x: Union[LatticePoint, Sequence[float]], a0: float, horizon: float) -> float:
    """
    Upper bound min(1, 2 P(Z >= (a0 - 1/|x|²)/sqrt(T))) on P(x is a contact at T).

    Raises:
        UsageError: If T <= 0
        DomainError: If a0|x|² < 1
    """
    if not horizon > 0:
        raise UsageError(f"Horizon must be positive, got {horizon}")
    norm_sq = _norm_sq(x)
    if a0 * norm_sq < 1.0 - 1e-12:
        raise DomainError(f"a0|x|² = {a0 * norm_sq:.6g} < 1: a0·Id is not L-free")
    argument = max(a0 - 1.0 / norm_sq, 0.0) / math.sqrt(horizon)
    return min(1.0, 2.0 * gaussian_tail(argument))


def _region_scale(n: int, a0: float, t: float, c0: float) -> float:
    if not t > 0:
        raise UsageError(f"t must be positive, got {t}")
    scale = a0 - c0 * math.sqrt(t * n)
    if scale <= 0:
        raise DomainError(
            f"a0 - C0·sqrt(tn) = {scale:.6g} <= 0: the summation region is unbounded"
        )
    return scale


def _region_points(lattice: LatticeBasis, a0: float, t: float, c0: float):
    scale = _region_scale(lattice.n, a0, t, c0)
    return enumerate_in_ellipsoid(lattice, SymMatrix.identity(lattice.n, scale), 1.0)


def k_t(lattice: LatticeBasis, a0: float, t: float, c0: float = DEFAULT_C0) -> float:
    """
    Sum of phi((a0 - 1/|x|²)/sqrt(t)) over nonzero x with (a0 - C0 sqrt(tn))|x|² < 1.

    Raises:
        DomainError: If the region is unbounded or a0·Id is not L-free
        ResourceError: If enumeration exceeds its cap
    """
    total = 0.0
    root_t = math.sqrt(t) if t > 0 else 0.0
    for point in _region_points(lattice, a0, t, c0):
        argument = (a0 - 1.0 / point.norm_sq) / root_t
        if argument < -1e-12:
            raise DomainError(
                f"Lattice point {list(point.coords)} lies inside a0·Id's ellipsoid",
                point=point.coords,
            )
        total += phi(max(argument, 0.0))
    return total


def k_t_shell(lattice: LatticeBasis, a0: float, t: float, c0: float = DEFAULT_C0) -> float:
    """Like ``k_t`` but restricted to the shell 1/a0 <= |x|² < 1/(a0 - C0 sqrt(tn))."""
    total = 0.0
    root_t = math.sqrt(t) if t > 0 else 0.0
    for point in _region_points(lattice, a0, t, c0):
        if a0 * point.norm_sq >= 1.0:
            total += phi((a0 - 1.0 / point.norm_sq) / root_t)
    return total


def _check_shell_hypotheses(n: int, t: float, a0: float) -> None:
    if n < 2:
        raise UsageError(f"Dimension must be at least 2, got {n}")
    t_cap = 20.0 * math.log(n) / (n * n)
    if not (0 < t <= t_cap):
        raise DomainError(f"Shell integral needs 0 < t <= 20 n^-2 log n = {t_cap:.6g}, got {t}")
    if not (1.0 <= a0 <= 1.0 + 10.0 / n):
        raise DomainError(f"Shell integral needs 1 <= a0 <= 1 + 10/n, got {a0}")


def _shell_upper_limit(n: int, t: float, a0: float, c0: float, truncate: bool) -> Tuple[float, bool]:
    nominal = c0 * math.sqrt(n)
    singular = a0 / math.sqrt(t)
    if nominal < singular:
        return nominal, False
    if not truncate:
        raise DomainError(
            f"Reduced shell integrand is singular at y = {singular:.6g} inside [0, {nominal:.6g}]"
        )
    return min(nominal, 0.5 * singular), True


def shell_integral(
    n: int,
    t: float,
    a0: float,
    c0: float = DEFAULT_C0,
    truncate: bool = False,
    rtol: float = 1e-8,
) -> ShellIntegralResult:
    """
    Integral of phi((a0 - 1/|x|²)/sqrt(t)) over the shell, divided by Vol(B^n).

    Uses the one-dimensional reduced form
    (n sqrt(t)/2) a0^(-(n+2)/2) ∫_0^Y phi(y) (1 - y sqrt(t)/a0)^(-(n+2)/2) dy
    with Y = C0 sqrt(n), split at the knee of phi and at y = 1.

    Args:
        n: Dimension
        t: Time, 0 < t <= 20 n^-2 log n
        a0: Starting scale, 1 <= a0 <= 1 + 10/n
        c0: Operator-norm tail constant
        truncate: Cap Y at a0/(2 sqrt(t)) instead of raising when the
            nominal range reaches the singularity y = a0/sqrt(t)
        rtol: Relative quadrature tolerance

    Raises:
        DomainError: On hypothesis violations or a singular integrand
    """
    _check_shell_hypotheses(n, t, a0)
    upper, truncated = _shell_upper_limit(n, t, a0, c0, truncate)
    root_t = math.sqrt(t)
    power = 0.5 * (n + 2)

    def integrand(y: float) -> float:
        return phi(y) * (1.0 - y * root_t / a0) ** (-power)

    breaks = [0.0] + [b for b in (phi_knee(), 1.0) if b < upper] + [upper]
    total = 0.0
    error = 0.0
    for lo, hi in zip(breaks, breaks[1:]):
        piece, piece_error = integrate.quad(integrand, lo, hi, epsrel=rtol, epsabs=0.0, limit=200)
        total += piece
        error += piece_error
    prefactor = 0.5 * n * root_t * a0 ** (-power)
    result = ShellIntegralResult(
        n=n,
        t=t,
        a0=a0,
        c0=c0,
        value=prefactor * total,
        upper_limit=upper,
        truncated=truncated,
        abs_error=prefactor * error,
    )
    logger.debug(f"Shell integral n={n} t={t:.6g}: {result.value:.10g} (Y={upper:.6g})")
    return result


def shell_integral_polar(
    n: int,
    t: float,
    a0: float,
    c0: float = DEFAULT_C0,
    truncate: bool = False,
    panels: int = 4000,
) -> float:
    """
    Same quantity as ``shell_integral`` from the radial form n ∫ r^(n-1) phi(...) dr.

    Composite 2-point Gauss–Legendre on each smooth piece of the radial range.
    """
    _check_shell_hypotheses(n, t, a0)
    upper, _ = _shell_upper_limit(n, t, a0, c0, truncate)
    root_t = math.sqrt(t)

    def radius(y: float) -> float:
        return (a0 - y * root_t) ** -0.5

    nodes, weights = leggauss(2)
    breaks_y = [0.0] + [b for b in (phi_knee(), 1.0) if b < upper] + [upper]
    total = 0.0
    for y_lo, y_hi in zip(breaks_y, breaks_y[1:]):
        r_lo, r_hi = radius(y_lo), radius(y_hi)
        edges = np.linspace(r_lo, r_hi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        for node, weight in zip(nodes, weights):
            r = mid + node * half
            y = (a0 - 1.0 / (r * r)) / root_t
            values = np.array([phi(max(v, 0.0)) for v in y])
            total += float(np.sum(weight * half * n * r ** (n - 1) * values))
    return total


def density_report(a: SymMatrix, lattice: LatticeBasis, check_free: bool = True) -> DensityReport:
    """
    Volume and density figures of the ellipsoid {Ax·x < 1} against L.

    Raises:
        DomainError: If A is not positive-definite or (with check_free) not L-free
    """
    if a.n != lattice.n:
        raise UsageError(f"Dimension mismatch: lattice n={lattice.n}, matrix n={a.n}")
    if check_free and not is_free(lattice, a, NUMERIC_FREE_TOL):
        raise DomainError("Ellipsoid is not L-free")
    n = a.n
    ld = log_det(a)
    volume_ratio = math.exp(-0.5 * ld)
    packing = volume_ratio * vol_ball(n) / (2.0**n * lattice.covolume)
    scaled = packing * 2.0**n
    return DensityReport(
        n=n,
        log_det=ld,
        covolume=lattice.covolume,
        final_volume_ratio=volume_ratio,
        packing_density=packing,
        minkowski_ratio=scaled / 2.0,
        n2_ratio=scaled / (n * n),
    )


def packing_lattice(a: SymMatrix, lattice: LatticeBasis) -> LatticeBasis:
    """
    Image of L under S = Vol(B^n)^(-1/n) det(A)^(-1/(2n)) sqrt(A).

    For L of covolume Vol(B^n) the image has covolume one, and when A is
    L-free its nonzero points avoid the open centered ball of volume
    det(A)^(-1/2).
    """
    if a.n != lattice.n:
        raise UsageError(f"Dimension mismatch: lattice n={lattice.n}, matrix n={a.n}")
    n = a.n
    factor = vol_ball(n) ** (-1.0 / n) * math.exp(-log_det(a) / (2.0 * n))
    root = matrix_power(a, 0.5).dense()
    return LatticeBasis(lattice.basis @ root * factor)


def logdet_drift(a: SymMatrix, projector: "ConstraintProjector") -> float:
    """
    Itô drift rate sum_ij |π(u_i ⊗s u_j)|² / (λ_i λ_j) of -2 d log det A.

    The sum runs over ordered pairs of eigenpairs of A.
    """
    decomp = spectral_decomposition(a)
    lam = decomp.eigenvalues
    if lam[0] <= 0:
        raise DomainError(
            f"log-det drift needs a positive-definite matrix (min eigenvalue {lam[0]:.6g})",
            min_eigenvalue=float(lam[0]),
        )
    u = decomp.eigenvectors
    total = 0.0
    for i in range(a.n):
        for j in range(i, a.n):
            v = projector.apply_vector(sym_tensor(u[:, i], u[:, j]).vector())
            weight = 1.0 if i == j else 2.0
            total += weight * float(v @ v) / (lam[i] * lam[j])
    return total


def logdet_drift_lower_bound(a: SymMatrix, projector: "ConstraintProjector") -> float:
    """dim F / ||A||²_op."""
    return projector.dim_f / op_norm(a) ** 2


def estimate_c0(
    n: int,
    samples: int,
    rng: np.random.Generator,
    quantile: float = 0.99,
    t: float = 1.0,
) -> float:
    """Empirical quantile of ||W_t||_op / sqrt(tn) over Dyson increments."""
    if samples < 1:
        raise UsageError(f"samples must be positive, got {samples}")
    if not 0 < quantile < 1:
        raise UsageError(f"quantile must lie in (0, 1), got {quantile}")
    ratios = np.array(
        [op_norm(dyson_increment(n, t, rng)) / math.sqrt(t * n) for _ in range(samples)]
    )
    return float(np.quantile(ratios, quantile))


def det_lower_bound(lattice: LatticeBasis) -> float:
    """(Vol(B^n) / C_L)² with C_L = 2^n covolume."""
    return (vol_ball(lattice.n) / minkowski_constant(lattice)) ** 2


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    if len(values) == 0:
        return 0.0, 0.0
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(len(values)))


def ensemble_stats(
    trajectories: Sequence["Trajectory"],
    horizon: Optional[float] = None,
    grid_points: int = ENSEMBLE_GRID_POINTS,
) -> EnsembleSummary:
    """
    Mean and standard-error curves on a uniform grid over [0, horizon].

    The horizon defaults to T = 16 n^-2 log n. Each trajectory is
    interpolated linearly between its records and held at its last value
    beyond them. Final statistics use each trajectory's last record.
    """
    from ellipsoidpack.evolve import default_horizon

    if not trajectories:
        raise UsageError("ensemble_stats needs at least one trajectory")
    if horizon is None:
        horizon = default_horizon(trajectories[0].final_state.n)
    grid = np.linspace(0.0, horizon, grid_points)

    logdets = np.empty((len(trajectories), grid_points))
    contacts = np.empty_like(logdets)
    dims = np.empty_like(logdets)
    for k, trajectory in enumerate(trajectories):
        records = trajectory.all_records()
        times = np.array([r.t for r in records])
        logdets[k] = np.interp(grid, times, [r.logdet for r in records])
        contacts[k] = np.interp(grid, times, [r.contacts for r in records])
        dims[k] = np.interp(grid, times, [r.dim_f for r in records])

    count = len(trajectories)
    se_curve = (
        np.std(logdets, axis=0, ddof=1) / math.sqrt(count) if count > 1 else np.zeros(grid_points)
    )
    final_logdet = np.array([tr.all_records()[-1].logdet for tr in trajectories])
    mean_final, se_final = _mean_se(final_logdet)
    compensator = np.array([tr.all_records()[-1].drift for tr in trajectories])

    return EnsembleSummary(
        n=trajectories[0].final_state.n,
        count=count,
        grid=grid,
        mean_logdet=np.mean(logdets, axis=0),
        se_logdet=se_curve,
        mean_contacts=np.mean(contacts, axis=0),
        mean_dim_f=np.mean(dims, axis=0),
        frozen_count=sum(1 for tr in trajectories if tr.termination == StepEvent.FROZEN),
        timeout_count=sum(1 for tr in trajectories if tr.termination == StepEvent.TIMEOUT),
        mean_final_logdet=mean_final,
        se_final_logdet=se_final,
        mean_volume_ratio=float(np.mean(np.exp(-0.5 * final_logdet))),
        mean_compensator=float(np.mean(compensator)),
    )


def projection_stats(
    trajectories: Sequence["Trajectory"], direction: SymMatrix
) -> Tuple[float, float]:
    """Mean and standard error of <A_T - a0 Id, E> across trajectories."""
    values = np.array(
        [
            inner(tr.final_state.a - SymMatrix.identity(direction.n, tr.a0), direction)
            for tr in trajectories
        ]
    )
    return _mean_se(values)


def hitting_frequency(
    trajectories: Sequence["Trajectory"], point: Union[LatticePoint, Sequence[int]]
) -> Tuple[float, float]:
    """Fraction (and standard error) of trajectories with ±point among their contacts."""
    coords = tuple(point.coords) if isinstance(point, LatticePoint) else tuple(int(v) for v in point)
    key = max(coords, tuple(-v for v in coords))
    hits = np.array(
        [1.0 if key in tr.final_state.contacts.keys() else 0.0 for tr in trajectories]
    )
    return _mean_se(hits)
