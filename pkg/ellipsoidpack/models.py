"""Data models for ellipsoidpack results."""

import math
from dataclasses import dataclass, field, asdict
from datetime import datetime
from typing import List, Dict, Any, Optional, Tuple
from enum import Enum

import numpy as np


class StepEvent(str, Enum):
    """Outcome tag of an accepted step."""

    ADVANCED = "advanced"
    HIT = "hit"
    FROZEN = "frozen"
    TIMEOUT = "timeout"


class Status(str, Enum):
    """Verification check status."""

    PASS = "PASS"
    FAIL = "FAIL"
    ERROR = "ERROR"
    SKIP = "SKIP"


@dataclass(frozen=True)
class TrajectoryRecord:
    """Observables recorded after an accepted step."""

    t: float
    logdet: float
    contacts: int  # 2 * number of antipodal representatives
    dim_f: int
    opdev: float  # ||A - a0 Id||_op
    event: StepEvent
    drift: float = 0.0  # accumulated -1/2 ∫ δ dt, not part of the JSONL record

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the JSONL record layout."""
        return {
            "t": self.t,
            "logdet": self.logdet,
            "contacts": self.contacts,
            "dimF": self.dim_f,
            "opdev": self.opdev,
            "event": self.event.value,
        }


@dataclass
class DensityReport:
    """Volume and density of a final ellipsoid against its lattice."""

    n: int
    log_det: float
    covolume: float
    final_volume_ratio: float  # Vol(E_A) / Vol(B^n) = det(A)^(-1/2)
    packing_density: float  # Vol(E_A) / (2^n covolume)
    minkowski_ratio: float  # packing_density / (2 * 2^-n)
    n2_ratio: float  # packing_density / (n^2 * 2^-n)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


@dataclass
class SiegelResult:
    """Monte Carlo estimate of E sum_{x != 0} phi(x) over random lattices."""

    n: int
    kind: str
    samples: int
    estimate: float
    se: float
    target: float

    @property
    def deviation(self) -> float:
        """Deviation from the target in standard errors."""
        if self.se == 0:
            return 0.0 if self.estimate == self.target else math.inf
        return abs(self.estimate - self.target) / self.se

    def within(self, k: float = 4.0) -> bool:
        return self.deviation <= k

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "n": self.n,
            "kind": self.kind,
            "samples": self.samples,
            "estimate": self.estimate,
            "se": self.se,
            "target": self.target,
        }


@dataclass
class ShortVectorResult:
    """Estimated probability that a random lattice has a vector of length <= radius."""

    n: int
    kind: str
    samples: int
    radius: float
    probability: float
    se: float
    siegel_bound: float  # radius^n, expected number of such vectors
    markov_bound: float = 1.0 / math.e

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


@dataclass
class ShellIntegralResult:
    """Shell integral normalized by Vol(B^n)."""

    n: int
    t: float
    a0: float
    c0: float
    value: float  # I / Vol(B^n)
    upper_limit: float  # effective upper limit of the reduced integral
    truncated: bool = False
    abs_error: float = 0.0

    @property
    def growth_ratio(self) -> float:
        """value / exp(n^2 t / 8)."""
        return self.value / math.exp(self.n**2 * self.t / 8.0)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        result = asdict(self)
        result["growth_ratio"] = self.growth_ratio
        return result


@dataclass
class EnsembleSummary:
    """Aggregated curves and final statistics of a trajectory ensemble."""

    n: int
    count: int
    grid: np.ndarray
    mean_logdet: np.ndarray
    se_logdet: np.ndarray
    mean_contacts: np.ndarray
    mean_dim_f: np.ndarray
    frozen_count: int = 0
    timeout_count: int = 0
    mean_final_logdet: float = 0.0
    se_final_logdet: float = 0.0
    mean_volume_ratio: float = 0.0
    mean_compensator: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def rows(self) -> List[Tuple[float, float, float, float, float]]:
        """Curve rows (t, mean_logdet, se_logdet, mean_contacts, mean_dimF)."""
        return [
            (float(t), float(m), float(s), float(c), float(d))
            for t, m, s, c, d in zip(
                self.grid, self.mean_logdet, self.se_logdet, self.mean_contacts, self.mean_dim_f
            )
        ]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary (final statistics only; curves go to CSV)."""
        return {
            "n": self.n,
            "count": self.count,
            "frozen_count": self.frozen_count,
            "timeout_count": self.timeout_count,
            "grid_points": int(len(self.grid)),
            "horizon": float(self.grid[-1]) if len(self.grid) else 0.0,
            "mean_final_logdet": self.mean_final_logdet,
            "se_final_logdet": self.se_final_logdet,
            "mean_volume_ratio": self.mean_volume_ratio,
            "mean_compensator": self.mean_compensator,
            "metadata": self.metadata,
        }


@dataclass
class CheckResult:
    """Result of a single verification check."""

    name: str
    status: Status
    message: str
    details: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        result = asdict(self)
        result["status"] = self.status.value
        return result


@dataclass
class VerificationSummary:
    """Results of one verification suite run."""

    suite: str
    checks: List[CheckResult] = field(default_factory=list)
    started_at: datetime = field(default_factory=datetime.now)

    @property
    def passed(self) -> bool:
        return all(c.status in (Status.PASS, Status.SKIP) for c in self.checks)

    @property
    def first_failure(self) -> Optional[CheckResult]:
        for check in self.checks:
            if check.status in (Status.FAIL, Status.ERROR):
                return check
        return None

    def get_status_counts(self) -> Dict[str, int]:
        """Count checks by status."""
        counts = {status.value: 0 for status in Status}
        for check in self.checks:
            counts[check.status.value] += 1
        return counts

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "suite": self.suite,
            "started_at": self.started_at.isoformat(),
            "passed": self.passed,
            "counts": self.get_status_counts(),
            "checks": [c.to_dict() for c in self.checks],
        }
