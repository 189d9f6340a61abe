"""Verification suites: module invariants checked against independent oracles."""

import itertools
import logging
import math
import time
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy import integrate, linalg

from ellipsoidpack.analysis import (
    density_report,
    gaussian_tail,
    hitting_bound,
    hitting_frequency,
    k_t,
    phi,
    projection_stats,
    shell_integral,
    shell_integral_polar,
)
from ellipsoidpack.errors import EllipsoidPackError
from ellipsoidpack.evolve import (
    ContactSet,
    EvolveConfig,
    Trajectory,
    build_projector,
    default_horizon,
    paper_a0,
    run,
)
from ellipsoidpack.lattice import (
    LatticeBasis,
    LatticePoint,
    contact_cap,
    contact_points,
    enumerate_in_ellipsoid,
    lll_reduce,
    named_lattice,
    normalize_covolume,
    shortest_vector,
)
from ellipsoidpack.models import CheckResult, Status, VerificationSummary
from ellipsoidpack.sampler import (
    RadialTestFunction,
    SamplerKind,
    hecke_lattice,
    sample_fundamental_domain,
    siegel_mc,
    vol_ball,
)
from ellipsoidpack.symcore import (
    SymMatrix,
    dyson_increment,
    inner,
    log_det,
    matrix_power,
    op_norm,
    quad_form,
    spectral_decomposition,
    sym_tensor,
)
from ellipsoidpack.utils.seeding import make_rng


logger = logging.getLogger("ellipsoidpack")

FIXTURE_DIR = Path(__file__).parent / "fixtures"
BRUTE_FORCE_LIMIT = 2_000_000

Check = Callable[[np.random.Generator, int], CheckResult]


def _result(name: str, ok: bool, message: str, **details) -> CheckResult:
    return CheckResult(
        name=name, status=Status.PASS if ok else Status.FAIL, message=message, details=details
    )


def random_spd(n: int, rng: np.random.Generator, low: float = 0.5, high: float = 2.0) -> SymMatrix:
    """Random positive-definite matrix with eigenvalues in [low, high]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    values = rng.uniform(low, high, size=n)
    return SymMatrix.from_dense((q * values) @ q.T)


def brute_force_box(lattice: LatticeBasis, a: SymMatrix, bound: float) -> List[int]:
    """Per-coordinate bound |c_i| <= |x|_max · |column i of B^-1|."""
    radius = math.sqrt(bound / np.linalg.eigvalsh(a.dense())[0])
    dual = np.linalg.inv(lattice.basis)
    return [int(math.floor(radius * np.linalg.norm(dual[:, i]))) + 1 for i in range(lattice.n)]


def brute_force_enumerate(
    lattice: LatticeBasis, a: SymMatrix, bound: float
) -> List[Tuple[int, ...]]:
    """Coordinates of all nonzero x with Ax·x < bound, by exhaustive box search."""
    box = brute_force_box(lattice, a, bound)
    if np.prod([2 * b + 1 for b in box]) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"Brute-force box {box} is too large")
    coords = np.array(list(itertools.product(*[range(-b, b + 1) for b in box])), dtype=float)
    embeddings = coords @ lattice.basis
    values = np.einsum("ij,jk,ik->i", embeddings, a.dense(), embeddings)
    keep = (values < bound) & np.any(coords != 0, axis=1)
    return sorted(tuple(int(v) for v in c) for c in coords[keep])


def _random_basis(n: int, rng: np.random.Generator) -> LatticeBasis:
    while True:
        rows = rng.uniform(-5.0, 5.0, size=(n, n))
        if abs(np.linalg.det(rows)) >= 1.0:
            return LatticeBasis(rows)


def least_squares_projector(contacts: ContactSet, n: int) -> np.ndarray:
    """I - M⁺M with M the stacked isometric vectors of x⊗x."""
    m = n * (n + 1) // 2
    if not len(contacts):
        return np.eye(m)
    rows = np.stack([sym_tensor(x.embedding, x.embedding).vector() for x in contacts])
    return np.eye(m) - linalg.pinv(rows) @ rows


# --- symcore -----------------------------------------------------------------


def check_inner_product(rng: np.random.Generator, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        a = SymMatrix.from_dense(rng.standard_normal((n, n)))
        b = SymMatrix.from_dense(rng.standard_normal((n, n)))
        dense = float(np.trace(a.dense() @ b.dense()))
        worst = max(worst, abs(inner(a, b) - dense) / max(1.0, abs(dense)))
        x = rng.standard_normal(n)
        via_inner = inner(a, sym_tensor(x, x))
        worst = max(worst, abs(quad_form(a, x) - via_inner) / max(1.0, abs(via_inner)))
    return _result("inner-product", worst <= 1e-12, f"max relative error {worst:.2e}")


def check_dyson_scaling(rng: np.random.Generator, samples: int) -> CheckResult:
    n, dt = 5, 0.3
    draws = np.stack([dyson_increment(n, dt, rng).dense() for _ in range(samples)])
    failures = []
    for (i, j), expected in (((0, 0), dt), ((0, 1), dt / 2)):
        squares = draws[:, i, j] ** 2
        se = float(np.std(squares, ddof=1) / math.sqrt(samples))
        if abs(float(np.mean(squares)) - expected) > 4 * se:
            failures.append(f"entry ({i},{j}) variance {np.mean(squares):.5f} vs {expected}")
    for _ in range(5):
        e = SymMatrix.from_dense(rng.standard_normal((n, n)))
        e = e / e.norm()
        proj = np.einsum("kij,ij->k", draws, e.dense())
        squares = proj**2
        se = float(np.std(squares, ddof=1) / math.sqrt(samples))
        if abs(float(np.mean(squares)) - dt) > 4 * se:
            failures.append(f"projected variance {np.mean(squares):.5f} vs {dt}")
    return _result(
        "dyson-scaling",
        not failures,
        "; ".join(failures) or f"variances match dt={dt} over {samples} draws",
    )


def check_spectral(rng: np.random.Generator, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        a = random_spd(n, rng, 0.1, 10.0)
        decomp = spectral_decomposition(a)
        error = op_norm(decomp.reconstruct() - a) / (1.0 + op_norm(a))
        alpha = float(rng.uniform(-2.0, 2.0))
        expected = alpha * log_det(a)
        power_error = abs(log_det(matrix_power(a, alpha)) - expected) / max(1.0, abs(expected))
        worst = max(worst, error / 1e-10, power_error / 1e-9)
    return _result("spectral", worst <= 1.0, f"max error relative to tolerance {worst:.2e}")


# --- lattice -----------------------------------------------------------------


def check_fixtures(rng: np.random.Generator, samples: int) -> CheckResult:
    expected = {"Z2": (1.0, 1.0), "D4": (2.0, 2.0), "E8": (1.0, 2.0)}
    failures = []
    for name, (covolume, min_norm_sq) in expected.items():
        lattice = LatticeBasis.from_file(FIXTURE_DIR / f"{name}.basis")
        if abs(lattice.covolume - covolume) > 1e-10 * covolume:
            failures.append(f"{name} covolume {lattice.covolume}")
        if abs(shortest_vector(lattice).norm_sq - min_norm_sq) > 1e-10:
            failures.append(f"{name} shortest vector")
    return _result("fixtures", not failures, "; ".join(failures) or "Z2, D4, E8 fixtures valid")


def check_enumeration_oracle(rng: np.random.Generator, samples: int) -> CheckResult:
    mismatches = 0
    checked = 0
    while checked < 100:
        lattice = _random_basis(3, rng)
        a = random_spd(3, rng, 0.05, 50.0)
        try:
            expected = brute_force_enumerate(lattice, a, 1.0)
        except ValueError:
            continue
        found = sorted(p.coords for p in enumerate_in_ellipsoid(lattice, a, 1.0))
        checked += 1
        if found != expected:
            mismatches += 1
    return _result(
        "enumeration-oracle", mismatches == 0, f"{mismatches} mismatches in {checked} instances"
    )


def check_contacts_and_lll(rng: np.random.Generator, samples: int) -> CheckResult:
    failures = []
    z2 = named_lattice("Zn", 2)
    found = {p.coords for p in contact_points(z2, SymMatrix.identity(2), 1e-12)}
    if found != {(1, 0), (-1, 0), (0, 1), (0, -1)}:
        failures.append(f"Z2 contacts {sorted(found)}")
    if len(found) > contact_cap(2):
        failures.append("contact cap exceeded")
    for _ in range(20):
        lattice = _random_basis(4, rng)
        reduced = lll_reduce(lattice)
        change = reduced.basis @ np.linalg.inv(lattice.basis)
        if not np.allclose(change, np.rint(change), atol=1e-6):
            failures.append("non-integral change of basis")
            break
        if abs(abs(np.linalg.det(np.rint(change))) - 1.0) > 1e-9:
            failures.append("change of basis not unimodular")
            break
    return _result("contacts-lll", not failures, "; ".join(failures) or "contacts and LLL valid")


# --- projector ---------------------------------------------------------------


def check_projector_oracle(rng: np.random.Generator, samples: int) -> CheckResult:
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        lattice = _random_basis(n, rng)
        size = int(rng.integers(0, n * (n + 1) // 2 + 2))
        points = [
            LatticePoint.from_coords(lattice, rng.integers(-2, 3, size=n)) for _ in range(size)
        ]
        contacts = ContactSet().with_points(points)
        projector = build_projector(contacts, n)
        p = projector.matrix()
        oracle = least_squares_projector(contacts, n)
        worst = max(worst, float(np.linalg.norm(p - oracle, 2)))
        worst = max(worst, float(np.linalg.norm(p @ p - p, 2)), float(np.linalg.norm(p - p.T, 2)))
        for x in contacts:
            v = sym_tensor(x.embedding, x.embedding).vector()
            residual = np.linalg.norm(projector.apply_vector(v)) / np.linalg.norm(v)
            worst = max(worst, float(residual))
    return _result("projector-oracle", worst <= 1e-10, f"max deviation {worst:.2e}")


# --- sampler -----------------------------------------------------------------


def check_vol_ball(rng: np.random.Generator, samples: int) -> CheckResult:
    values = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}
    worst = max(abs(vol_ball(n) - v) / v for n, v in values.items())
    return _result("vol-ball", worst <= 1e-12, f"max relative error {worst:.2e}")


def check_fundamental_domain(rng: np.random.Generator, samples: int) -> CheckResult:
    inv_y = np.array([1.0 / sample_fundamental_domain(rng)[1] for _ in range(samples)])
    target, _ = integrate.dblquad(
        lambda y, x: 3.0 / math.pi / y**3,
        -0.5,
        0.5,
        lambda x: math.sqrt(1.0 - x * x),
        lambda x: math.inf,
    )
    se = float(np.std(inv_y, ddof=1) / math.sqrt(samples))
    mean = float(np.mean(inv_y))
    return _result(
        "fundamental-domain",
        abs(mean - target) <= 4 * se,
        f"E[1/y] = {mean:.5f} ± {se:.5f}, quadrature {target:.5f}",
    )


def check_siegel(rng: np.random.Generator, samples: int) -> CheckResult:
    failures = []
    for radius in (0.5, 1.5):
        result = siegel_mc(2, SamplerKind.exact2d(), RadialTestFunction.ball(radius), samples, rng)
        if not result.within(4.0):
            failures.append(
                f"radius {radius}: {result.estimate:.4f} ± {result.se:.4f} vs {result.target}"
            )
    if abs(hecke_lattice(2, 3, [1]).covolume - 3.0) > 1e-12:
        failures.append("Hecke covolume")
    return _result("siegel", not failures, "; ".join(failures) or "Siegel targets within 4 SE")


# --- evolve ------------------------------------------------------------------


def _desk_config(n: int) -> EvolveConfig:
    return EvolveConfig.for_dimension(n, dt_max=default_horizon(n) / 500.0)


def check_frozen_runs(rng: np.random.Generator, samples: int) -> CheckResult:
    failures = []
    frozen = 0
    timed_out = []
    for n in (2, 3):
        lattice = normalize_covolume(named_lattice("Zn", n), vol_ball(n))
        config = _desk_config(n)
        for index in range(3):
            trajectory = run(lattice, config, make_rng(1000 + n, index))
            state = trajectory.final_state
            if not trajectory.frozen:
                timed_out.append(f"n={n}#{index}")
                continue
            frozen += 1
            count = state.contacts.count
            if not n * (n + 1) <= count <= contact_cap(n):
                failures.append(f"n={n}: {count} contacts")
            if state.contact_residual() > 1e-8:
                failures.append(f"n={n}: contact residual {state.contact_residual():.2e}")
            records = trajectory.all_records()
            if any(b.contacts < a.contacts for a, b in zip(records, records[1:])):
                failures.append(f"n={n}: contact count decreased")
            if any(b.dim_f > a.dim_f for a, b in zip(records, records[1:])):
                failures.append(f"n={n}: dim F increased")
            inside = enumerate_in_ellipsoid(lattice, state.a, 1.0 - 1e-8)
            if inside:
                failures.append(f"n={n}: point {inside[0].coords} inside final ellipsoid")
    if not frozen:
        failures.append("no run froze")
    message = "; ".join(failures) or f"frozen-state bounds hold on {frozen} runs"
    if timed_out:
        message += f"; {len(timed_out)} timed out ({', '.join(timed_out)})"
    return _result(
        "frozen-runs", not failures, message, frozen=frozen, timed_out=len(timed_out)
    )


def check_determinism(rng: np.random.Generator, samples: int) -> CheckResult:
    lattice = normalize_covolume(named_lattice("Zn", 2), vol_ball(2))
    config = _desk_config(2)
    first = run(lattice, config, make_rng(7, 0))
    second = run(lattice, config, make_rng(7, 0))
    same = [r.to_dict() for r in first.records] == [r.to_dict() for r in second.records]
    return _result("determinism", same, "identical records" if same else "records differ")


# --- statistics --------------------------------------------------------------


def _horizon_runs(
    n: int, count: int, rng: np.random.Generator, steps_per_horizon: float = 2000.0
) -> Tuple[LatticeBasis, List[Trajectory]]:
    """``count`` runs on normalized Z^n stopped at T or at freezing, keeping final states."""
    lattice = normalize_covolume(named_lattice("Zn", n), vol_ball(n))
    horizon = default_horizon(n)
    config = EvolveConfig.for_dimension(
        n, dt_max=horizon / steps_per_horizon, max_time=horizon, record_stride=50
    )
    root = int(rng.integers(2**63))
    return lattice, [run(lattice, config, make_rng(root, i)) for i in range(count)]


def check_martingale(rng: np.random.Generator, samples: int) -> CheckResult:
    n = 4
    count = max(50, samples // 40)
    _, trajectories = _horizon_runs(n, count, rng)
    directions = {
        "Id/sqrt(n)": SymMatrix.identity(n, 1.0 / math.sqrt(n)),
        "e1*e2": sym_tensor(np.eye(n)[0], np.eye(n)[1]) * math.sqrt(2.0),
    }
    failures = []
    parts = []
    for name, direction in directions.items():
        mean, se = projection_stats(trajectories, direction)
        parts.append(f"{name}: {mean:+.4f} ± {se:.4f}")
        if abs(mean) > 4.0 * se:
            failures.append(f"<A_T - a0 Id, {name}> mean {mean:.4f} beyond 4 SE ({se:.4f})")
    return _result(
        "martingale",
        not failures,
        "; ".join(failures) or f"{', '.join(parts)} over {count} runs",
    )


def check_logdet_decay(rng: np.random.Generator, samples: int) -> CheckResult:
    n = 4
    count = max(50, samples // 40)
    _, trajectories = _horizon_runs(n, count, rng)
    a0 = trajectories[0].a0
    values = np.array([log_det(tr.final_state.a) for tr in trajectories])
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(count))
    start = n * math.log(a0)
    compensator = float(np.mean([tr.final_state.drift for tr in trajectories]))
    return _result(
        "logdet-decay",
        mean <= start + 3.0 * se,
        f"E log det A_T = {mean:.4f} ± {se:.4f} vs n log a0 = {start:.4f} "
        f"(mean compensator {compensator:.4f})",
    )


def check_hitting_frequency(rng: np.random.Generator, samples: int) -> CheckResult:
    n = 3
    count = max(100, samples // 10)
    lattice, trajectories = _horizon_runs(n, count, rng, steps_per_horizon=500.0)
    x = shortest_vector(lattice)
    bound = hitting_bound(x, paper_a0(n), default_horizon(n))
    frequency, se = hitting_frequency(trajectories, x)
    return _result(
        "hitting-frequency",
        frequency <= bound + 3.0 * se,
        f"{list(x.coords)} hit in {frequency:.4f} ± {se:.4f} of {count} runs, bound {bound:.4f}",
    )


def check_volume_trend(rng: np.random.Generator, samples: int) -> CheckResult:
    """Mean final volume ratio by dimension; monotonicity is reported, not required."""
    count = max(3, samples // 2000)
    root = int(rng.integers(2**63))
    means: Dict[int, float] = {}
    for n in (3, 4, 5, 6):
        lattice = normalize_covolume(named_lattice("Zn", n), vol_ball(n))
        config = _desk_config(n)
        ratios = []
        for index in range(count):
            trajectory = run(lattice, config, make_rng(root + n, index))
            if trajectory.frozen:
                ratios.append(math.exp(-0.5 * log_det(trajectory.final_state.a)))
        if ratios:
            means[n] = float(np.mean(ratios))
    if not means:
        return _result("volume-trend", False, "no run froze")
    values = [means[n] for n in sorted(means)]
    increasing = all(b > a for a, b in zip(values, values[1:]))
    listing = ", ".join(f"n={n}: {means[n]:.4f}" for n in sorted(means))
    trend = "increasing" if increasing else "not increasing"
    return _result(
        "volume-trend",
        all(math.isfinite(v) and v > 0 for v in values),
        f"mean final Vol(E)/Vol(B) {listing} ({trend})",
        means={str(n): v for n, v in means.items()},
        increasing=increasing,
    )


# --- analysis ----------------------------------------------------------------


def check_phi(rng: np.random.Generator, samples: int) -> CheckResult:
    grid = np.linspace(0.0, 10.0, 10001)
    values = np.array([phi(r) for r in grid])
    tails = np.array([gaussian_tail(r) for r in grid])
    monotone = bool(np.all(np.diff(values) <= 1e-15))
    dominated = bool(np.all(tails <= values + 1e-15))
    return _result(
        "phi",
        monotone and dominated and phi(0.0) == 0.5,
        f"nonincreasing={monotone}, tail<=phi={dominated}",
    )


def check_k_t(rng: np.random.Generator, samples: int) -> CheckResult:
    lattice = normalize_covolume(named_lattice("Zn", 2), vol_ball(2))
    a0, t, c0 = 0.4, 0.005, 2.0
    scale = a0 - c0 * math.sqrt(2 * t)
    coords = brute_force_enumerate(lattice, SymMatrix.identity(2, scale), 1.0)
    expected = 0.0
    for c in coords:
        norm_sq = float(np.sum(lattice.embed(c) ** 2))
        expected += phi((a0 - 1.0 / norm_sq) / math.sqrt(t))
    value = k_t(lattice, a0, t, c0)
    return _result(
        "k-t", abs(value - expected) <= 1e-12, f"K_t = {value:.12g}, brute force {expected:.12g}"
    )


def check_shell_integral(rng: np.random.Generator, samples: int) -> CheckResult:
    failures = []
    for n in (16, 32, 64):
        t = default_horizon(n)
        result = shell_integral(n, t, paper_a0(n), 2.0, truncate=True)
        if not (math.isfinite(result.growth_ratio) and result.growth_ratio <= 100.0):
            failures.append(f"n={n}: ratio {result.growth_ratio:.4g}")
    for n in (8, 16):
        t = default_horizon(n)
        reduced = shell_integral(n, t, paper_a0(n), 2.0, truncate=True).value
        polar = shell_integral_polar(n, t, paper_a0(n), 2.0, truncate=True)
        if abs(reduced - polar) > 1e-6 * abs(reduced):
            failures.append(f"n={n}: reduced {reduced:.10g} vs polar {polar:.10g}")
    z2 = density_report(SymMatrix.identity(2), named_lattice("Zn", 2))
    if abs(z2.packing_density - math.pi / 4) > 1e-12:
        failures.append(f"Z2 density {z2.packing_density}")
    return _result("shell-integral", not failures, "; ".join(failures) or "shell checks hold")


SUITES: Dict[str, List[Check]] = {
    "symcore": [check_inner_product, check_dyson_scaling, check_spectral],
    "lattice": [check_fixtures, check_enumeration_oracle, check_contacts_and_lll],
    "projector": [check_projector_oracle],
    "sampler": [check_vol_ball, check_fundamental_domain, check_siegel],
    "evolve": [check_frozen_runs, check_determinism],
    "statistics": [
        check_martingale,
        check_logdet_decay,
        check_hitting_frequency,
        check_volume_trend,
    ],
    "analysis": [check_phi, check_k_t, check_shell_integral],
}


def run_suite(suite: str, seed: int = 0, samples: int = 10000) -> VerificationSummary:
    """
    Run a verification suite.

    Args:
        suite: Suite name or "all"
        seed: Root seed; each check gets its own stream
        samples: Sample count for Monte Carlo checks

    Returns:
        VerificationSummary with one CheckResult per check
    """
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"Unknown suite '{suite}'. Use one of {', '.join(SUITES)} or all")
    names = list(SUITES) if suite == "all" else [suite]
    summary = VerificationSummary(suite=suite)
    index = 0
    for name in names:
        for check in SUITES[name]:
            rng = make_rng(seed, index)
            index += 1
            start = time.time()
            try:
                result = check(rng, samples)
            except (EllipsoidPackError, ArithmeticError, ValueError) as e:
                result = CheckResult(
                    name=check.__name__.replace("check_", "").replace("_", "-"),
                    status=Status.ERROR,
                    message=f"{type(e).__name__}: {e}",
                )
            logger.info(
                f"[{name}] {result.name}: {result.status.value} ({result.message})",
                extra={"duration": round((time.time() - start) * 1000)},
            )
            summary.checks.append(result)
    return summary
