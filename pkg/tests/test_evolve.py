"""Tests for the evolving ellipsoid process."""

import math
from dataclasses import replace
from unittest.mock import patch

import numpy as np
import pytest

from ellipsoidpack.analysis import logdet_drift
from ellipsoidpack.errors import DiscretizationError, DomainError, UsageError
from ellipsoidpack.evolve import (
    A0Policy,
    ConstraintProjector,
    ContactSet,
    EvolveConfig,
    build_projector,
    covering_margin,
    crossing_fractions,
    default_horizon,
    init_state,
    paper_a0,
    renormalize_contacts,
    renormalize_matrix,
    run,
    step,
    watch_radius,
)
from ellipsoidpack.lattice import LatticeBasis, is_free, named_lattice, normalize_covolume
from ellipsoidpack.models import StepEvent
from ellipsoidpack.sampler import vol_ball
from ellipsoidpack.symcore import SymMatrix, inner, quad_form, sym_tensor
from ellipsoidpack.utils.seeding import make_rng


def normalized(kind, n):
    return normalize_covolume(named_lattice(kind, n), vol_ball(n))


def fast_config(n, **overrides):
    """Coarse steps so that desk-scale runs freeze quickly."""
    return EvolveConfig.for_dimension(n, dt_max=default_horizon(n) / 200.0, **overrides)


@pytest.fixture
def z2():
    return normalized("Zn", 2)


@pytest.fixture
def unit_z2():
    return named_lattice("Zn", 2)


def test_horizon_and_paper_a0():
    assert default_horizon(2) == pytest.approx(4.0 * math.log(2.0))
    assert paper_a0(2) == pytest.approx(4.0)
    assert paper_a0(3) == pytest.approx(2.25)


def test_config_defaults():
    cfg = EvolveConfig.for_dimension(4)
    horizon = default_horizon(4)
    assert cfg.dt_max == pytest.approx(horizon / 2000.0)
    assert cfg.dt_min == pytest.approx(cfg.dt_max * 1e-6)
    assert cfg.max_time == pytest.approx(100.0 * horizon)
    assert cfg.eps_contact == 1e-9
    assert cfg.a0_policy == A0Policy.PAPER


def test_config_ignores_none_overrides():
    cfg = EvolveConfig.for_dimension(3, dt_max=None, eta=0.25)
    assert cfg.dt_max == pytest.approx(default_horizon(3) / 2000.0)
    assert cfg.eta == 0.25


@pytest.mark.parametrize(
    "overrides",
    [
        {"eta": 0.0},
        {"eta": 1.5},
        {"dt_max": 1e-3, "dt_min": 1e-2},
        {"max_time": -1.0},
        {"renorm_period": 0},
        {"record_stride": 0},
        {"a0": -2.0},
    ],
)
def test_config_validation(overrides):
    with pytest.raises(UsageError):
        EvolveConfig.for_dimension(2, **overrides)


def test_resolve_a0(z2):
    assert EvolveConfig.for_dimension(2).resolve_a0(z2) == pytest.approx(4.0)
    auto = EvolveConfig.for_dimension(2, a0_policy=A0Policy.AUTO, a0_margin=0.05)
    assert auto.resolve_a0(z2) == pytest.approx(1.05 / math.pi)
    explicit = EvolveConfig.for_dimension(2, a0=0.3)
    assert explicit.resolve_a0(z2) == 0.3


def test_contact_set_deduplicates(unit_z2):
    contacts = ContactSet().with_points(
        [
            unit_z2.point((1, 0)),
            unit_z2.point((-1, 0)),
            unit_z2.point((0, 0)),
            unit_z2.point((1, 0)),
            unit_z2.point((1, 1)),
        ]
    )
    assert len(contacts) == 2
    assert contacts.count == 4
    assert unit_z2.point((-1, -1)) in contacts
    assert unit_z2.point((0, 1)) not in contacts


def test_projector_identity():
    projector = ConstraintProjector.identity(3)
    assert projector.dim_f == 6
    x = SymMatrix.diag([1.0, 2.0, 3.0])
    assert np.allclose(projector(x).coeffs, x.coeffs)


def test_projector_single_contact(unit_z2):
    contacts = ContactSet().with_points([unit_z2.point((1, 0))])
    projector = build_projector(contacts, 2)
    assert projector.rank == 1
    assert projector.dim_f == 2
    projected = projector(SymMatrix.identity(2))
    assert quad_form(projected, [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)


def test_projector_properties():
    rng = np.random.default_rng(4)
    lattice = LatticeBasis(rng.standard_normal((3, 3)) + 2 * np.eye(3))
    contacts = ContactSet().with_points(
        [lattice.point(c) for c in [(1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 1, 1)]]
    )
    projector = build_projector(contacts, 3)
    assert projector.dim_f == 2

    x = SymMatrix.from_dense(rng.standard_normal((3, 3)))
    y = SymMatrix.from_dense(rng.standard_normal((3, 3)))
    px = projector(x)
    assert np.allclose(projector(px).coeffs, px.coeffs, atol=1e-10)
    assert inner(px, y) == pytest.approx(inner(x, projector(y)), abs=1e-10)
    for rep in contacts:
        tensor = sym_tensor(rep.embedding, rep.embedding)
        assert projector(tensor).norm() <= 1e-10 * max(1.0, tensor.norm())


def test_projector_drops_dependent_contacts(unit_z2):
    points = [unit_z2.point(c) for c in [(1, 0), (0, 1), (1, 1), (1, -1)]]
    projector = build_projector(ContactSet().with_points(points), 2)
    assert projector.rank == 3
    assert projector.dim_f == 0


def test_init_state(z2):
    state = init_state(z2, fast_config(2), make_rng(0))
    assert state.t == 0.0
    assert state.a0 == pytest.approx(4.0)
    assert np.allclose(state.a.dense(), 4.0 * np.eye(2))
    assert len(state.contacts) == 0
    assert state.dim_f == 3
    assert not state.frozen
    assert state.opdev() == pytest.approx(0.0)


def test_init_state_dim_f_n3():
    state = init_state(normalized("Zn", 3), fast_config(3), make_rng(0))
    assert state.dim_f == 6


def test_init_state_rejects_interior_point(z2):
    with pytest.raises(DomainError) as excinfo:
        init_state(z2, fast_config(2, a0=0.25), make_rng(0))
    assert "inside" in str(excinfo.value)
    assert excinfo.value.point is not None


def test_init_state_rejects_boundary_point():
    half = named_lattice("Zn", 3).scaled(0.5)
    with pytest.raises(DomainError) as excinfo:
        init_state(half, fast_config(3, a0=4.0), make_rng(0))
    assert "on the boundary of" in str(excinfo.value)
    assert sorted(abs(c) for c in excinfo.value.point) == [0, 0, 1]


def test_step_advances(z2):
    cfg = fast_config(2)
    state = init_state(z2, cfg, make_rng(1))
    new_state, outcome = step(state)
    assert outcome.event == StepEvent.ADVANCED
    assert new_state.t == pytest.approx(cfg.dt_max)
    assert new_state.steps == 1
    assert new_state.dim_f == 3
    assert not np.array_equal(new_state.a.coeffs, state.a.coeffs)


def test_step_is_deterministic(z2):
    cfg = fast_config(2)
    first, _ = step(init_state(z2, cfg, make_rng(3)))
    second, _ = step(init_state(z2, cfg, make_rng(3)))
    assert np.array_equal(first.a.coeffs, second.a.coeffs)


def test_renormalize_matrix_pins_contacts(unit_z2):
    contacts = ContactSet().with_points([unit_z2.point((1, 0)), unit_z2.point((0, 1))])
    drifted = SymMatrix.from_dense([[1.0 + 3e-12, 0.2], [0.2, 1.0 - 2e-12]])
    fixed, norm = renormalize_matrix(drifted, contacts, 1e-9)
    assert norm > 0
    assert quad_form(fixed, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    assert quad_form(fixed, [0.0, 1.0]) == pytest.approx(1.0, abs=1e-15)
    assert fixed.coeffs[1] == pytest.approx(0.2)


def test_renormalize_matrix_rejects_large_drift(unit_z2):
    contacts = ContactSet().with_points([unit_z2.point((1, 0))])
    with pytest.raises(DiscretizationError):
        renormalize_matrix(SymMatrix.identity(2, 1.01), contacts, 1e-9)


def test_renormalize_contacts_requires_contacts(z2):
    state = init_state(z2, fast_config(2), make_rng(0))
    with pytest.raises(UsageError):
        renormalize_contacts(state)


def test_run_n2_freezes_with_six_contacts(z2):
    trajectory = run(z2, fast_config(2), make_rng(7), stream_id="7")
    state = trajectory.final_state
    assert trajectory.frozen
    assert trajectory.termination == StepEvent.FROZEN
    assert state.contacts.count == 6
    assert state.dim_f == 0
    assert state.contact_residual() <= 1e-8
    assert is_free(z2, state.a, tol=1e-8)

    hits = [r for r in trajectory.records if r.event in (StepEvent.HIT, StepEvent.FROZEN)]
    counts = [r.contacts for r in hits]
    assert counts == sorted(counts)
    assert counts[-1] == 6

    block = trajectory.final_block()
    assert block["termination"] == "frozen"
    assert block["stream_id"] == "7"
    assert len(block["contacts"]) == 3
    assert len(block["A"]) == 3


def test_run_contacts_never_decrease(z2):
    trajectory = run(z2, fast_config(2), make_rng(11))
    contacts = [r.contacts for r in trajectory.all_records()]
    dims = [r.dim_f for r in trajectory.all_records()]
    assert all(b >= a for a, b in zip(contacts, contacts[1:]))
    assert all(b <= a for a, b in zip(dims, dims[1:]))


def test_run_is_deterministic(z2):
    first = run(z2, fast_config(2), make_rng(5))
    second = run(z2, fast_config(2), make_rng(5))
    assert [r.to_dict() for r in first.records] == [r.to_dict() for r in second.records]
    assert first.final_block() == second.final_block()


def test_run_timeout(z2):
    cfg = fast_config(2)
    cfg = replace(cfg, max_time=10.5 * cfg.dt_max)
    trajectory = run(z2, cfg, make_rng(1))
    assert trajectory.termination == StepEvent.TIMEOUT
    assert trajectory.final_state.t == pytest.approx(cfg.max_time)
    assert not trajectory.frozen


def test_run_record_stride(z2):
    cfg = fast_config(2)
    dense = run(z2, replace(cfg, max_time=40 * cfg.dt_max), make_rng(2))
    sparse = run(z2, replace(cfg, max_time=40 * cfg.dt_max, record_stride=10), make_rng(2))
    assert len(sparse.records) < len(dense.records)
    assert sparse.records[-1].event == StepEvent.TIMEOUT
    assert sparse.records[-1].t == dense.records[-1].t


def test_run_alpha_variant_freezes(z2):
    trajectory = run(z2, fast_config(2, alpha=0.5), make_rng(8))
    assert trajectory.frozen
    assert trajectory.final_state.contacts.count == 6


def test_run_logdet_drift_accumulates(z2):
    trajectory = run(z2, fast_config(2), make_rng(9))
    drifts = [r.drift for r in trajectory.all_records()]
    assert drifts[0] == 0.0
    assert drifts[-1] < 0.0
    assert all(b <= a for a, b in zip(drifts, drifts[1:]))


def test_step_rejects_frozen_state(z2):
    trajectory = run(z2, fast_config(2), make_rng(7))
    with pytest.raises(UsageError):
        step(trajectory.final_state)


@pytest.mark.slow
@pytest.mark.parametrize("n,runs", [(2, 10), (3, 10), (4, 10), (5, 3), (6, 2)])
def test_frozen_contact_bounds(n, runs):
    lattice = normalized("Zn", n)
    for i in range(runs):
        trajectory = run(lattice, fast_config(n), make_rng(100 + n, i))
        assert trajectory.frozen
        count = trajectory.final_state.contacts.count
        assert n * (n + 1) <= count <= 2 * (2**n - 1)
        assert trajectory.final_state.contact_residual() <= 1e-8


def test_crossing_fractions_linear_in_increment():
    a = SymMatrix.identity(2)
    delta = SymMatrix.from_dense([[-0.5, 0.0], [0.0, 0.0]])
    points = np.array([[1.2, 0.0], [0.0, 1.2], [0.9, 0.0]])
    lam = crossing_fractions(a, delta, points)
    assert lam[0] == pytest.approx(0.44 / 0.72)
    assert lam[0] == pytest.approx(0.6111, abs=1e-4)
    assert lam[1] == math.inf
    assert lam[2] == 0.0


def test_step_hits_at_linear_crossing_fraction():
    lattice = LatticeBasis(np.diag([1.2, 5.0]))
    cfg = EvolveConfig.for_dimension(2, a0=1.0, dt_max=0.01, dt_min=0.01)
    state = init_state(lattice, cfg, make_rng(0))
    delta = SymMatrix.from_dense([[-0.5, 0.0], [0.0, 0.0]])
    with patch("ellipsoidpack.evolve.dyson_increment", return_value=delta):
        new_state, outcome = step(state)
    assert outcome.event == StepEvent.HIT
    assert outcome.dt == pytest.approx(0.01 * 0.44 / 0.72)
    assert new_state.t == pytest.approx(outcome.dt)
    assert new_state.a.dense()[0, 0] == pytest.approx(1.0 / 1.44)
    assert [p.antipodal_key() for p in outcome.new_contacts] == [(1, 0)]
    assert new_state.dim_f == 2


def test_watch_radius():
    assert watch_radius(0.25, 1.0, 0.5) == pytest.approx(1.5)
    assert watch_radius(0.5, 1.0, 0.5) == pytest.approx(2.0)
    assert watch_radius(0.0, 3.0, 0.1) == pytest.approx(1.1)
    with pytest.raises(DiscretizationError):
        watch_radius(1.0, 1.0, 0.5)


def test_covering_margin():
    a = SymMatrix.identity(2)
    assert covering_margin(a, SymMatrix.identity(2, 0.1), 0.5, False) == pytest.approx(0.25)
    assert covering_margin(a, SymMatrix.identity(2, 0.3), 0.5, False) == pytest.approx(0.45)
    assert covering_margin(a, SymMatrix.identity(2, 0.4), 0.5, False) is None
    assert covering_margin(a, SymMatrix.identity(2, 0.4), 0.5, True) == pytest.approx(0.4)
    with pytest.raises(DiscretizationError):
        covering_margin(a, SymMatrix.identity(2, 1.2), 0.5, True)


def test_step_widens_watch_list_for_degenerate_form():
    lattice = LatticeBasis(np.diag([1.2, 100.0]))
    cfg = EvolveConfig.for_dimension(2, a0=1.0, dt_max=1e-6, dt_min=1e-6)
    state = init_state(lattice, cfg, make_rng(0))
    state = replace(state, a=SymMatrix.from_dense([[1.0, 0.0], [0.0, 0.004]]), watch_ref=None)
    delta = SymMatrix.from_dense([[0.0, 0.002], [0.002, 0.0]])
    with patch("ellipsoidpack.evolve.dyson_increment", return_value=delta):
        new_state, outcome = step(state)
    assert outcome.event == StepEvent.ADVANCED
    assert outcome.attempts == 1
    assert new_state.watch_margin == pytest.approx(0.002)
    assert new_state.a.dense()[0, 1] == pytest.approx(0.002)


def test_step_carries_dt_over(z2):
    cfg = fast_config(2)
    state = replace(init_state(z2, cfg, make_rng(1)), dt_next=cfg.dt_max / 8.0)
    new_state, outcome = step(state)
    assert outcome.event == StepEvent.ADVANCED
    assert outcome.dt == pytest.approx(cfg.dt_max / 8.0)
    assert new_state.dt_next == pytest.approx(cfg.dt_max / 4.0)

    capped, _ = step(replace(new_state, dt_next=cfg.dt_max))
    assert capped.dt_next == pytest.approx(cfg.dt_max)


def test_run_evaluates_drift_once_per_record(z2):
    cfg = fast_config(2)
    cfg = replace(cfg, max_time=40 * cfg.dt_max, record_stride=10)
    with patch("ellipsoidpack.evolve.logdet_drift", wraps=logdet_drift) as drift:
        trajectory = run(z2, cfg, make_rng(2))
    assert drift.call_count <= len(trajectory.records) + 1
    assert drift.call_count < trajectory.final_state.steps


def test_run_reports_domain_failure_as_discretization(z2):
    with patch(
        "ellipsoidpack.evolve.logdet_drift", side_effect=DomainError("A is not positive-definite")
    ):
        with pytest.raises(DiscretizationError) as excinfo:
            run(z2, fast_config(2), make_rng(0))
    assert "left the domain" in str(excinfo.value)
    assert isinstance(excinfo.value.__cause__, DomainError)


@pytest.mark.slow
def test_coarse_n3_run_keeps_contacts_exact():
    lattice = normalized("Zn", 3)
    horizon = default_horizon(3)
    cfg = EvolveConfig.for_dimension(3, dt_max=horizon / 20.0, max_time=3.0 * horizon)
    trajectory = run(lattice, cfg, make_rng(42, 0))
    state = trajectory.final_state
    assert trajectory.termination in (StepEvent.FROZEN, StepEvent.TIMEOUT)
    assert state.contact_residual() <= 1e-8
    assert is_free(lattice, state.a, tol=1e-8)
