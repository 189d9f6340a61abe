"""Tests for random lattice samplers and Siegel Monte Carlo."""

import math

import numpy as np
import pytest

from ellipsoidpack.errors import UsageError
from ellipsoidpack.lattice import LatticeBasis
from ellipsoidpack.sampler import (
    RadialTestFunction,
    SamplerKind,
    SamplerVariant,
    default_hecke_prime,
    exact2d_lattice,
    hecke_average,
    hecke_lattice,
    is_prime,
    lattice_sum,
    next_prime,
    sample_fundamental_domain,
    sample_lattice,
    short_vector_probability,
    siegel_mc,
    vol_ball,
)
from ellipsoidpack.utils.seeding import make_rng


# E[1/y] over the fundamental domain under (3/pi) dx dy / y^2.
EXACT2D_MEAN_INV_Y = 3.0 / math.pi * math.atanh(0.5)


@pytest.fixture
def rng():
    return make_rng(99)


@pytest.mark.parametrize(
    "n,expected", [(1, 2.0), (2, math.pi), (3, 4.0 * math.pi / 3.0), (4, math.pi**2 / 2.0)]
)
def test_vol_ball(n, expected):
    assert vol_ball(n) == pytest.approx(expected, rel=1e-12)


def test_vol_ball_rejects_zero():
    with pytest.raises(UsageError):
        vol_ball(0)


def test_primes():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert next_prime(14) == 17
    assert next_prime(17) == 17
    assert default_hecke_prime(3) == 83


def test_sampler_kind_validation():
    SamplerKind.exact2d().validate(2)
    with pytest.raises(UsageError):
        SamplerKind.exact2d().validate(3)
    with pytest.raises(UsageError):
        SamplerKind.hecke(15).validate(3)
    SamplerKind.hecke(101).validate(3)
    assert SamplerKind.hecke(101).label == "hecke(p=101)"
    assert SamplerKind.exact2d().label == "exact2d"
    assert SamplerKind.hecke().prime_for(2) == 17


def test_fundamental_domain_samples_in_domain(rng):
    for _ in range(2000):
        x, y = sample_fundamental_domain(rng)
        assert abs(x) <= 0.5
        assert y >= math.sqrt(3.0) / 2.0
        assert x * x + y * y >= 1.0


def test_fundamental_domain_mean_inverse_y(rng):
    samples = 20000
    inv_y = np.array([1.0 / sample_fundamental_domain(rng)[1] for _ in range(samples)])
    se = np.std(inv_y, ddof=1) / math.sqrt(samples)
    assert abs(np.mean(inv_y) - EXACT2D_MEAN_INV_Y) < 4.5 * se


def test_exact2d_lattice_unimodular(rng):
    lattice = exact2d_lattice(rng)
    assert lattice.covolume == pytest.approx(1.0, rel=1e-12)


def test_hecke_lattice_covolume_and_congruence():
    lattice = hecke_lattice(2, 3, [1])
    assert lattice.covolume == pytest.approx(3.0)
    for coords in [(1, 0), (0, 1), (2, -1), (5, 3)]:
        x = lattice.embed(coords)
        assert round(x[1] - x[0]) % 3 == 0


def test_hecke_lattice_errors():
    with pytest.raises(UsageError):
        hecke_lattice(3, 9, [1, 2])
    with pytest.raises(UsageError):
        hecke_lattice(3, 7, [1])


@pytest.mark.parametrize("n,kind", [(2, SamplerKind.exact2d()), (3, SamplerKind.hecke(11))])
def test_sample_lattice_normalized(rng, n, kind):
    for _ in range(5):
        lattice = sample_lattice(n, kind, rng)
        assert isinstance(lattice, LatticeBasis)
        assert lattice.covolume == pytest.approx(vol_ball(n), rel=1e-10)


def test_sample_lattice_deterministic():
    a = sample_lattice(3, SamplerKind.hecke(101), make_rng(5, 2))
    b = sample_lattice(3, SamplerKind.hecke(101), make_rng(5, 2))
    assert np.array_equal(a.basis, b.basis)


def test_radial_test_function_values():
    phi = RadialTestFunction((0.5, 1.0), (2.0, 1.0))
    assert np.allclose(phi([0.0, 0.49, 0.5, 0.99, 1.0, 3.0]), [2, 2, 1, 1, 0, 0])
    assert phi.support_radius == 1.0
    assert RadialTestFunction.zero().support_radius == 0.0


def test_radial_test_function_integral():
    assert RadialTestFunction.ball(1.5).integral(2) == pytest.approx(math.pi * 2.25)
    shell = RadialTestFunction((1.0, 2.0), (0.0, 1.0))
    assert shell.integral(3) == pytest.approx(vol_ball(3) * 7.0)


def test_radial_test_function_rejects_unbounded():
    with pytest.raises(UsageError):
        RadialTestFunction.ball(math.inf)
    with pytest.raises(UsageError):
        RadialTestFunction.ball(1.0, math.inf)
    with pytest.raises(UsageError):
        RadialTestFunction((1.0, 0.5), (1.0, 1.0))
    with pytest.raises(UsageError):
        RadialTestFunction((1.0,), (1.0, 2.0))


def test_lattice_sum_z2():
    z2 = LatticeBasis(np.eye(2))
    assert lattice_sum(z2, RadialTestFunction.ball(1.2)) == 4.0
    assert lattice_sum(z2, RadialTestFunction.ball(1.5)) == 8.0
    assert lattice_sum(z2, RadialTestFunction.zero()) == 0.0


def test_siegel_zero_function_is_exactly_zero(rng):
    result = siegel_mc(2, SamplerKind.exact2d(), RadialTestFunction.zero(), 50, rng)
    assert result.estimate == 0.0
    assert result.se == 0.0
    assert result.target == 0.0


def test_siegel_rejects_too_few_samples(rng):
    with pytest.raises(UsageError):
        siegel_mc(2, SamplerKind.exact2d(), RadialTestFunction.ball(0.5), 1, rng)


def test_siegel_small_ball(rng):
    result = siegel_mc(2, SamplerKind.exact2d(), RadialTestFunction.ball(0.5), 4000, rng)
    assert result.target == pytest.approx(0.25)
    assert result.within(4.5)


def test_siegel_large_ball(rng):
    result = siegel_mc(2, SamplerKind.exact2d(), RadialTestFunction.ball(1.5), 4000, rng)
    assert result.target == pytest.approx(2.25)
    assert result.within(4.5)
    assert result.to_dict()["kind"] == "exact2d"


@pytest.mark.slow
@pytest.mark.parametrize("radius,target", [(0.5, 0.25), (1.5, 2.25)])
def test_siegel_acceptance_scale(radius, target):
    result = siegel_mc(
        2, SamplerKind.exact2d(), RadialTestFunction.ball(radius), 100000, make_rng(2, 0)
    )
    assert result.target == pytest.approx(target)
    assert result.within(4.0)


@pytest.mark.parametrize("p,expected", [(11, 16 / 11), (101, 172 / 101), (1009, 1728 / 1009)])
def test_hecke_average_counts_generic_points(p, expected):
    # Points on the last axis never lie in L_a; the rest do with probability 1/p.
    assert hecke_average(3, p, RadialTestFunction.ball(1.2)) == pytest.approx(expected)


def test_hecke_average_moves_monotonically_to_target():
    phi = RadialTestFunction.ball(1.2)
    target = phi.integral(3) / vol_ball(3)
    deviations = [abs(hecke_average(3, p, phi) - target) for p in (11, 101, 1009)]
    assert deviations[0] > deviations[1] > deviations[2]


def test_hecke_average_rejects_composite():
    with pytest.raises(UsageError):
        hecke_average(3, 12, RadialTestFunction.ball(1.0))


@pytest.mark.slow
def test_hecke_estimates_approach_target():
    phi = RadialTestFunction.ball(1.2)
    deviations = []
    for p in (11, 101, 1009):
        result = siegel_mc(3, SamplerKind.hecke(p), phi, 20000, make_rng(3, p))
        assert abs(result.estimate - hecke_average(3, p, phi)) <= 4.0 * result.se
        deviations.append(abs(result.estimate - result.target))
    assert deviations[0] > deviations[2]


def test_short_vector_probability(rng):
    result = short_vector_probability(2, SamplerKind.exact2d(), 2000, rng)
    assert result.radius == pytest.approx(0.5)
    assert result.siegel_bound == pytest.approx(0.25)
    assert result.probability <= result.siegel_bound + 4 * result.se + 1e-12
    assert result.markov_bound == pytest.approx(1.0 / math.e)


def test_sampler_variant_values():
    assert SamplerVariant("exact2d") is SamplerVariant.EXACT2D
    assert SamplerVariant("hecke") is SamplerVariant.HECKE
