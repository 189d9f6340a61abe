"""Constrained matrix Brownian motion of an L-free ellipsoid.

The ellipsoid {x : Ax·x < 1} starts at A = a0·Id and moves by projected
symmetric Gaussian increments dA = pi(dW), where pi is the orthogonal
projector onto F = {B : Bx·x = 0 for every contact x}. Lattice points that
reach the boundary become contacts and stay there; the run freezes once F
is trivial.

Each step draws an increment for the current dt and solves, for every
watched lattice point, the linear equation for the fraction of the step at
which the point would cross the boundary. A crossing inside the step makes
the step re-simulate once at a smaller dt with fresh noise; a crossing
found in the refined step is accepted as a hit.

Only watched points are tested. The watch list holds every point that can
reach the boundary while A stays within an op-norm margin of the matrix it
was enumerated at; an increment beyond the margin re-enumerates with a
radius covering it.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ellipsoidpack.analysis import logdet_drift
from ellipsoidpack.errors import DiscretizationError, DomainError, ResourceError, UsageError
from ellipsoidpack.lattice import (
    DEFAULT_EPS_CONTACT,
    LatticeBasis,
    LatticePoint,
    contact_cap,
    enumerate_in_ellipsoid,
    shortest_vector,
)
from ellipsoidpack.models import StepEvent, TrajectoryRecord
from ellipsoidpack.symcore import (
    SymMatrix,
    dyson_increment,
    is_positive_definite,
    log_det,
    matrix_power,
    min_eigenvalue,
    op_norm,
    packed_size,
    quad_forms,
    sym_product,
    sym_tensor,
)


logger = logging.getLogger("ellipsoidpack")

FRAME_DROP_TOL = 1e-10
REFINE_SAFETY = 0.81
MAX_STEP_ATTEMPTS = 64
WATCH_WIDEN_LIMIT = 0.5
DT_GROWTH = 2.0
DEFAULT_MAX_WATCH = 10**6


def default_horizon(n: int) -> float:
    """T = 16 n^-2 log n."""
    if n < 2:
        raise UsageError(f"Dimension must be at least 2, got {n}")
    return 16.0 * math.log(n) / (n * n)


def paper_a0(n: int) -> float:
    """a0 = (1 - 1/n)^-2."""
    return (1.0 - 1.0 / n) ** -2


class A0Policy(str, Enum):
    """How the starting scale a0 is chosen when no explicit value is given."""

    PAPER = "paper"
    AUTO = "auto"


@dataclass(frozen=True)
class EvolveConfig:
    """Discretization and stopping parameters of one trajectory."""

    dt_max: float
    dt_min: float
    max_time: float
    eps_contact: float = DEFAULT_EPS_CONTACT
    eta: float = 0.5
    renorm_period: int = 50
    alpha: float = 0.0
    a0: Optional[float] = None
    a0_policy: A0Policy = A0Policy.PAPER
    a0_margin: float = 0.05
    record_stride: int = 1
    max_watch: int = DEFAULT_MAX_WATCH

    @classmethod
    def for_dimension(cls, n: int, **overrides: Any) -> "EvolveConfig":
        """
        Defaults scaled to the dimension.

        dt_max = T/2000, dt_min = dt_max * 1e-6 and max_time = 100 T with
        T = 16 n^-2 log n. Keyword overrides set with None are ignored.
        """
        horizon = default_horizon(n)
        values: Dict[str, Any] = {
            "dt_max": horizon / 2000.0,
            "max_time": 100.0 * horizon,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "dt_min" not in values:
            values["dt_min"] = values["dt_max"] * 1e-6
        config = cls(**values)
        config.validate()
        return config

    def validate(self) -> None:
        """
        Check parameter ranges.

        Raises:
            UsageError: If any parameter is out of range
        """
        if not (0 < self.dt_min <= self.dt_max):
            raise UsageError(f"Need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}")
        if not (0 < self.eta <= 1):
            raise UsageError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.max_time > 0:
            raise UsageError(f"max_time must be positive, got {self.max_time}")
        if not self.eps_contact > 0:
            raise UsageError(f"eps_contact must be positive, got {self.eps_contact}")
        if self.renorm_period < 1:
            raise UsageError(f"renorm_period must be at least 1, got {self.renorm_period}")
        if self.record_stride < 1:
            raise UsageError(f"record_stride must be at least 1, got {self.record_stride}")
        if self.a0 is not None and not self.a0 > 0:
            raise UsageError(f"a0 must be positive, got {self.a0}")
        if self.a0_margin < 0:
            raise UsageError(f"a0_margin must be non-negative, got {self.a0_margin}")

    def resolve_a0(self, lattice: LatticeBasis) -> float:
        """Explicit a0, else the policy value for this lattice."""
        if self.a0 is not None:
            return float(self.a0)
        if A0Policy(self.a0_policy) == A0Policy.PAPER:
            return paper_a0(lattice.n)
        shortest = shortest_vector(lattice).norm_sq
        return (1.0 + self.a0_margin) / shortest

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dt_max": self.dt_max,
            "dt_min": self.dt_min,
            "max_time": self.max_time,
            "eps_contact": self.eps_contact,
            "eta": self.eta,
            "renorm_period": self.renorm_period,
            "alpha": self.alpha,
            "a0": self.a0,
            "a0_policy": A0Policy(self.a0_policy).value,
            "a0_margin": self.a0_margin,
            "record_stride": self.record_stride,
        }


@dataclass(frozen=True)
class ContactSet:
    """Contact points, one representative per antipodal pair, in insertion order."""

    representatives: Tuple[LatticePoint, ...] = ()

    def __len__(self) -> int:
        return len(self.representatives)

    def __iter__(self):
        return iter(self.representatives)

    def __contains__(self, point: LatticePoint) -> bool:
        key = point.antipodal_key()
        return any(rep.antipodal_key() == key for rep in self.representatives)

    @property
    def count(self) -> int:
        """Number of contact points, antipodes included."""
        return 2 * len(self.representatives)

    def keys(self) -> List[Tuple[int, ...]]:
        return [rep.antipodal_key() for rep in self.representatives]

    def with_points(self, points: Sequence[LatticePoint]) -> "ContactSet":
        """New set with ``points`` appended, skipping zero, duplicate and antipodal entries."""
        reps = list(self.representatives)
        seen = set(self.keys())
        for point in points:
            key = point.antipodal_key()
            if point.is_zero or key in seen:
                continue
            seen.add(key)
            reps.append(point)
        return ContactSet(tuple(reps))

    def embeddings(self) -> np.ndarray:
        if not self.representatives:
            return np.zeros((0, 0))
        return np.stack([rep.embedding for rep in self.representatives])


@dataclass(frozen=True, eq=False)
class ConstraintProjector:
    """
    Orthogonal projector onto F = {B : Bx·x = 0 for all contacts x}.

    ``frame`` holds an orthonormal basis (rows, isometric coordinates) of
    span{x⊗x}; the projector is Id - frameᵀ·frame.
    """

    n: int
    frame: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "ConstraintProjector":
        return cls(n, np.zeros((0, packed_size(n))))

    @property
    def rank(self) -> int:
        return int(self.frame.shape[0])

    @property
    def dim_f(self) -> int:
        return packed_size(self.n) - self.rank

    def apply_vector(self, v: np.ndarray) -> np.ndarray:
        if self.rank == 0:
            return np.array(v, dtype=float)
        return v - self.frame.T @ (self.frame @ v)

    def apply(self, x: SymMatrix) -> SymMatrix:
        return SymMatrix.from_vector(self.n, self.apply_vector(x.vector()))

    def __call__(self, x: SymMatrix) -> SymMatrix:
        return self.apply(x)

    def matrix(self) -> np.ndarray:
        """Dense projector in isometric coordinates."""
        return np.eye(packed_size(self.n)) - self.frame.T @ self.frame

    def frame_matrices(self) -> List[SymMatrix]:
        return [SymMatrix.from_vector(self.n, row) for row in self.frame]


def build_projector(contacts: ContactSet, n: int) -> ConstraintProjector:
    """
    Orthonormalize {x⊗x : x in contacts} by modified Gram–Schmidt.

    Vectors whose residual falls below FRAME_DROP_TOL relative to their
    original norm are dropped, so dim_F reflects the actual rank.
    """
    frame: List[np.ndarray] = []
    for rep in contacts:
        if rep.embedding.shape[0] != n:
            raise UsageError(f"Contact dimension {rep.embedding.shape[0]} does not match n={n}")
        v = sym_tensor(rep.embedding, rep.embedding).vector()
        original = float(np.linalg.norm(v))
        if original == 0.0:
            continue
        # Two passes keep the frame orthonormal to working precision.
        for _ in range(2):
            for q in frame:
                v = v - (q @ v) * q
        residual = float(np.linalg.norm(v))
        if residual < FRAME_DROP_TOL * original:
            continue
        frame.append(v / residual)
    if not frame:
        return ConstraintProjector.identity(n)
    return ConstraintProjector(n, np.array(frame))


@dataclass(frozen=True, eq=False)
class ProcessState:
    """Full state of the evolving ellipsoid."""

    t: float
    a: SymMatrix
    a0: float
    lattice: LatticeBasis
    config: EvolveConfig
    rng: np.random.Generator
    contacts: ContactSet = field(default_factory=ContactSet)
    projector: Optional[ConstraintProjector] = None
    watch_list: Tuple[LatticePoint, ...] = ()
    watch_ref: Optional[SymMatrix] = None
    watch_margin: float = 0.0
    dt_next: Optional[float] = None
    drift_rate: Optional[float] = None
    steps: int = 0
    drift: float = 0.0

    @property
    def n(self) -> int:
        return self.a.n

    @property
    def dim_f(self) -> int:
        return self.projector.dim_f if self.projector is not None else packed_size(self.n)

    @property
    def frozen(self) -> bool:
        return self.dim_f == 0

    def opdev(self) -> float:
        """||A - a0 Id||_op."""
        return op_norm(self.a - SymMatrix.identity(self.n, self.a0))

    def record(self, event: StepEvent) -> TrajectoryRecord:
        return TrajectoryRecord(
            t=self.t,
            logdet=log_det(self.a),
            contacts=self.contacts.count,
            dim_f=self.dim_f,
            opdev=self.opdev(),
            event=event,
            drift=self.drift,
        )

    def contact_residual(self) -> float:
        """max |Ax·x - 1| over contacts."""
        if not len(self.contacts):
            return 0.0
        return float(np.max(np.abs(quad_forms(self.a, self.contacts.embeddings()) - 1.0)))


@dataclass(frozen=True)
class StepOutcome:
    """What happened in one accepted step."""

    event: StepEvent
    dt: float
    new_contacts: Tuple[LatticePoint, ...] = ()
    attempts: int = 1
    refined: bool = False


def watch_radius(margin: float, min_eig: float, eta: float) -> float:
    """
    Enumeration radius r that keeps unwatched points outside within an op-norm margin.

    An unwatched x has Ax·x >= r, so (A + B)x·x >= r·(1 - ||B||_op/λ_min(A))
    for every symmetric B; r = 1/(1 - margin/λ_min) keeps that at least 1.
    Never below 1 + eta.
    """
    if not 0 <= margin < min_eig:
        raise DiscretizationError(
            f"Watch margin {margin:.3g} is not below the smallest eigenvalue {min_eig:.3g} of A"
        )
    return max(1.0 + eta, 1.0 / (1.0 - margin / min_eig))


def _refresh_watch_list(state: ProcessState, margin: Optional[float] = None) -> ProcessState:
    """
    Watch every antipodal pair that A + B could reach while ||B||_op <= margin.

    The default margin is eta/2·λ_min(A), which watches Ax·x < 1 + eta.
    """
    cfg = state.config
    min_eig = min_eigenvalue(state.a)
    if margin is None:
        margin = 0.5 * cfg.eta * min_eig
    radius = watch_radius(margin, min_eig, cfg.eta)
    try:
        points = enumerate_in_ellipsoid(state.lattice, state.a, radius, cap=2 * cfg.max_watch)
    except ResourceError as e:
        raise ResourceError(f"Watch-list refresh overflow: {e}")
    reps: List[LatticePoint] = []
    seen = set()
    for point in points:
        key = point.antipodal_key()
        if key not in seen:
            seen.add(key)
            reps.append(point)
    for rep in state.contacts:
        if rep.antipodal_key() not in seen:
            reps.append(rep)
    logger.debug(
        f"Watch list refreshed at t={state.t:.6g}: {len(reps)} pairs, radius {radius:.4g}"
    )
    return replace(state, watch_list=tuple(reps), watch_ref=state.a, watch_margin=margin)


def _watch_safe(state: ProcessState, proposal: SymMatrix) -> bool:
    return op_norm(proposal - state.watch_ref) <= state.watch_margin


def covering_margin(a: SymMatrix, delta: SymMatrix, eta: float, at_floor: bool) -> Optional[float]:
    """
    Op-norm margin for a watch list at A that covers the segment A + sΔ, s in [0, 1].

    The margin is (1 + eta)·||Δ||_op, at least the default eta/2·λ_min(A).
    Returns None when it would exceed WATCH_WIDEN_LIMIT·λ_min(A) and a
    smaller dt is still available; at dt_min the bare ||Δ||_op is used.

    Raises:
        DiscretizationError: If at dt_min ||Δ||_op reaches λ_min(A)
    """
    min_eig = min_eigenvalue(a)
    spread = op_norm(delta)
    margin = max(0.5 * eta * min_eig, (1.0 + eta) * spread)
    if margin <= WATCH_WIDEN_LIMIT * min_eig:
        return margin
    if not at_floor:
        return None
    if not spread < min_eig:
        raise DiscretizationError(
            f"Increment of norm {spread:.3g} at dt_min reaches the smallest eigenvalue "
            f"{min_eig:.3g}; positive-definiteness cannot be kept"
        )
    return spread


def renormalize_matrix(
    a: SymMatrix, contacts: ContactSet, eps_contact: float
) -> Tuple[SymMatrix, float]:
    """
    Minimal-norm symmetric correction pinning Ax·x = 1 on every contact.

    Returns:
        (corrected matrix, Frobenius norm of the correction)

    Raises:
        DiscretizationError: If the correction exceeds 10·eps_contact·|contacts|
    """
    if not len(contacts):
        return a, 0.0
    embeddings = contacts.embeddings()
    constraints = np.stack([sym_tensor(x, x).vector() for x in embeddings])
    residual = 1.0 - quad_forms(a, embeddings)
    correction, _, _, _ = linalg.lstsq(constraints, residual)
    norm = float(np.linalg.norm(correction))
    bound = 10.0 * eps_contact * contacts.count
    if norm > bound:
        raise DiscretizationError(
            f"Contact renormalization needs a correction of norm {norm:.3g} "
            f"(bound {bound:.3g}); the trajectory has drifted off its contacts"
        )
    return a + SymMatrix.from_vector(a.n, correction), norm


def renormalize_contacts(state: ProcessState) -> ProcessState:
    """Pin every contact back onto the boundary after floating-point drift."""
    if not len(state.contacts):
        raise UsageError("renormalize_contacts requires at least one contact")
    a, norm = renormalize_matrix(state.a, state.contacts, state.config.eps_contact)
    logger.debug(f"Renormalized {len(state.contacts)} contacts, correction {norm:.3g}")
    return replace(state, a=a)


def init_state(
    lattice: LatticeBasis, cfg: EvolveConfig, rng: np.random.Generator
) -> ProcessState:
    """
    State at t = 0 with A = a0·Id and no contacts.

    Raises:
        DomainError: If a nonzero lattice point lies in or on a0·Id's ellipsoid
    """
    cfg.validate()
    a0 = cfg.resolve_a0(lattice)
    a = SymMatrix.identity(lattice.n, a0)
    offending = enumerate_in_ellipsoid(lattice, a, 1.0 + cfg.eps_contact)
    if offending:
        point = offending[0]
        value = a0 * point.norm_sq
        where = "inside" if value < 1.0 else "on the boundary of"
        raise DomainError(
            f"a0·Id with a0={a0:.6g} is not L-free: lattice point {list(point.coords)} "
            f"(quad_form {value:.6g}) lies {where} the starting ellipsoid",
            point=point.coords,
        )
    state = ProcessState(
        t=0.0,
        a=a,
        a0=a0,
        lattice=lattice,
        config=cfg,
        rng=rng,
        projector=ConstraintProjector.identity(lattice.n),
    )
    return _refresh_watch_list(state)


def _direction(state: ProcessState, g: SymMatrix) -> SymMatrix:
    if state.config.alpha == 0:
        return state.projector.apply(g)
    return state.projector.apply(sym_product(matrix_power(state.a, state.config.alpha), g))


def crossing_fractions(a: SymMatrix, delta: SymMatrix, embeddings: np.ndarray) -> np.ndarray:
    """
    Fraction s at which (A + sΔ)x·x falls to 1, per row of ``embeddings``.

    Linear in s: s = (Ax·x - 1)/(-Δx·x) when Δx·x < 0, else inf. Points
    already at or inside the boundary give 0.
    """
    q = quad_forms(a, embeddings)
    d = quad_forms(delta, embeddings)
    lam = np.full(len(q), math.inf)
    inward = d < 0
    lam[inward] = np.maximum(q[inward] - 1.0, 0.0) / (-d[inward])
    return lam


def _first_crossing(
    state: ProcessState, delta: SymMatrix
) -> Tuple[float, Optional[int], np.ndarray]:
    """Smallest crossing fraction over watched non-contact points."""
    if not state.watch_list:
        return math.inf, None, np.zeros(0)
    embeddings = np.stack([p.embedding for p in state.watch_list])
    contact_keys = set(state.contacts.keys())
    free = np.array([p.antipodal_key() not in contact_keys for p in state.watch_list])
    lam = np.where(free, crossing_fractions(state.a, delta, embeddings), math.inf)
    index = int(np.argmin(lam))
    return float(lam[index]), (index if math.isfinite(lam[index]) else None), free


def step(state: ProcessState) -> Tuple[ProcessState, StepOutcome]:
    """
    Advance the process by one accepted step.

    The first attempt uses the step size carried over from the previous
    step, grown by DT_GROWTH after a step accepted without retries. An
    increment that leaves the watch margin widens the watch list to cover
    it instead of failing.

    Returns:
        (new state, outcome); outcome.event is advanced, hit, frozen or timeout

    Raises:
        UsageError: If the state is already frozen
        DiscretizationError: If positive-definiteness cannot be kept at dt_min
        ResourceError: On watch-list overflow
    """
    if state.frozen:
        raise UsageError("Cannot step a frozen state")
    cfg = state.config
    n = state.n

    remaining = cfg.max_time - state.t
    if remaining <= 0:
        return state, StepOutcome(StepEvent.TIMEOUT, 0.0)
    dt = min(cfg.dt_max, state.dt_next or cfg.dt_max, remaining)
    dt_floor = min(cfg.dt_min, dt)
    reaches_horizon = dt >= remaining
    refined = False

    if state.watch_ref is None:
        state = _refresh_watch_list(state)
    delta_rate = state.drift_rate
    if delta_rate is None:
        delta_rate = logdet_drift(state.a, state.projector) if cfg.alpha == 0 else 0.0

    for attempt in range(1, MAX_STEP_ATTEMPTS + 1):
        delta = _direction(state, dyson_increment(n, dt, state.rng))
        proposal = state.a + delta

        if not _watch_safe(state, proposal):
            margin = covering_margin(state.a, delta, cfg.eta, at_floor=dt <= dt_floor)
            if margin is None:
                dt = max(dt_floor, dt / 2.0)
                reaches_horizon = False
                logger.debug(f"Increment large against λ_min(A); retrying with dt={dt:.3g}")
                continue
            state = _refresh_watch_list(state, margin)

        lam_star, index, free = _first_crossing(state, delta)
        if index is not None and lam_star <= 1.0:
            if not refined and dt > dt_floor:
                dt = max(dt_floor, REFINE_SAFETY * lam_star**2 * dt)
                refined = True
                reaches_horizon = False
                logger.debug(f"Crossing at fraction {lam_star:.4g}; refining dt to {dt:.3g}")
                continue
            a_hit = state.a + lam_star * delta
            if not is_positive_definite(a_hit):
                if dt <= dt_floor:
                    raise DiscretizationError(
                        f"Lost positive-definiteness at dt_min={dt_floor:.3g} (t={state.t:.6g})"
                    )
                dt = max(dt_floor, dt / 2.0)
                reaches_horizon = False
                continue
            return _accept_hit(
                state, a_hit, lam_star, dt, index, free, attempt, refined, delta_rate
            )

        if not is_positive_definite(proposal):
            if dt <= dt_floor:
                raise DiscretizationError(
                    f"Lost positive-definiteness at dt_min={dt_floor:.3g} (t={state.t:.6g})"
                )
            dt = max(dt_floor, dt / 2.0)
            reaches_horizon = False
            logger.debug(f"Proposal not positive-definite; retrying with dt={dt:.3g}")
            continue

        t_new = cfg.max_time if reaches_horizon else state.t + dt
        grown = min(cfg.dt_max, DT_GROWTH * dt) if attempt == 1 and not refined else dt
        new_state = replace(
            state,
            a=proposal,
            t=t_new,
            steps=state.steps + 1,
            drift=state.drift - 0.5 * delta_rate * dt,
            dt_next=grown,
            drift_rate=delta_rate,
        )
        event = StepEvent.TIMEOUT if t_new >= cfg.max_time else StepEvent.ADVANCED
        return new_state, StepOutcome(event, dt, attempts=attempt, refined=refined)

    raise DiscretizationError(f"No acceptable step after {MAX_STEP_ATTEMPTS} attempts")


def _accept_hit(
    state: ProcessState,
    a_hit: SymMatrix,
    lam_star: float,
    dt: float,
    index: int,
    free: np.ndarray,
    attempt: int,
    refined: bool,
    delta_rate: float,
) -> Tuple[ProcessState, StepOutcome]:
    cfg = state.config
    embeddings = np.stack([p.embedding for p in state.watch_list])
    values = quad_forms(a_hit, embeddings)
    admitted = [state.watch_list[index]]
    for i, point in enumerate(state.watch_list):
        if i != index and free[i] and abs(values[i] - 1.0) <= cfg.eps_contact:
            admitted.append(point)

    contacts = state.contacts.with_points(admitted)
    a_new, _ = renormalize_matrix(a_hit, contacts, cfg.eps_contact)
    projector = build_projector(contacts, state.n)
    dt_used = lam_star * dt
    new_state = replace(
        state,
        a=a_new,
        t=state.t + dt_used,
        contacts=contacts,
        projector=projector,
        steps=state.steps + 1,
        drift=state.drift - 0.5 * delta_rate * dt_used,
        dt_next=dt,
        drift_rate=None,
    )
    logger.debug(
        f"Hit at t={new_state.t:.6g}: {[list(p.coords) for p in admitted]} "
        f"(contacts {contacts.count}, dim_F {projector.dim_f})"
    )
    event = StepEvent.FROZEN if projector.dim_f == 0 else StepEvent.HIT
    return new_state, StepOutcome(
        event, dt_used, new_contacts=tuple(admitted), attempts=attempt, refined=refined
    )


def check_frozen_contacts(state: ProcessState) -> None:
    """
    Contact count of a frozen state lies in [n(n+1), 2(2^n - 1)].

    Raises:
        DiscretizationError: If the count is outside those bounds
    """
    n = state.n
    count = state.contacts.count
    if not (n * (n + 1) <= count <= contact_cap(n)):
        raise DiscretizationError(
            f"Frozen state has {count} contacts, outside [{n * (n + 1)}, {contact_cap(n)}]"
        )


@dataclass
class Trajectory:
    """Recorded observables of one run plus its final state."""

    initial: TrajectoryRecord
    records: List[TrajectoryRecord]
    final_state: ProcessState
    stream_id: Optional[str] = None

    @property
    def termination(self) -> StepEvent:
        return self.records[-1].event if self.records else self.initial.event

    @property
    def frozen(self) -> bool:
        return self.termination == StepEvent.FROZEN

    @property
    def a0(self) -> float:
        return self.final_state.a0

    def all_records(self) -> List[TrajectoryRecord]:
        return [self.initial] + self.records

    def final_block(self) -> Dict[str, Any]:
        """Final state: packed coefficients of A and contact coordinates."""
        state = self.final_state
        return {
            "n": state.n,
            "t": state.t,
            "a0": state.a0,
            "termination": self.termination.value,
            "steps": state.steps,
            "dimF": state.dim_f,
            "A": [float(c) for c in state.a.coeffs],
            "contacts": [list(rep.coords) for rep in state.contacts],
            "stream_id": self.stream_id,
        }


def run(
    lattice: LatticeBasis,
    cfg: EvolveConfig,
    rng: np.random.Generator,
    stream_id: Optional[str] = None,
) -> Trajectory:
    """
    Evolve from a0·Id until frozen or max_time.

    Every record_stride-th accepted step is recorded, and every hit and
    terminal step regardless of stride.

    Raises:
        DomainError: If a0·Id is not L-free
        DiscretizationError: On unrecoverable discretization failures, on a
            domain failure mid-run, or on contact counts outside the
            frozen-state bounds
        ResourceError: On enumeration or watch-list overflow
    """
    state = init_state(lattice, cfg, rng)
    initial = state.record(StepEvent.ADVANCED)
    records: List[TrajectoryRecord] = []

    try:
        while True:
            state, outcome = step(state)
            # Hits already pin their contacts.
            if (
                outcome.event == StepEvent.ADVANCED
                and len(state.contacts)
                and state.steps % cfg.renorm_period == 0
            ):
                state = renormalize_contacts(state)
            terminal = outcome.event in (StepEvent.FROZEN, StepEvent.TIMEOUT)
            if outcome.event != StepEvent.ADVANCED or state.steps % cfg.record_stride == 0:
                records.append(state.record(outcome.event))
                # The log-det drift rate is re-evaluated once per record.
                state = replace(state, drift_rate=None)
            if terminal:
                break
    except DomainError as e:
        raise DiscretizationError(f"Trajectory left the domain at t={state.t:.6g}: {e}") from e

    if state.frozen:
        check_frozen_contacts(state)
        logger.debug(f"Frozen at t={state.t:.6g} with {state.contacts.count} contacts")
    else:
        logger.warning(
            f"Trajectory reached max_time={cfg.max_time:.6g} with dim_F={state.dim_f}",
            extra={"stream_id": stream_id},
        )
    return Trajectory(initial=initial, records=records, final_state=state, stream_id=stream_id)
