"""Run many independent trajectories, optionally across worker processes."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from rich.progress import (
    Progress,
    SpinnerColumn,
    TextColumn,
    BarColumn,
    TaskProgressColumn,
    TimeRemainingColumn,
    TimeElapsedColumn,
)

from ellipsoidpack.errors import DomainError, UsageError
from ellipsoidpack.evolve import Trajectory, run
from ellipsoidpack.lattice import LatticeBasis, LatticeKind, named_lattice, normalize_covolume
from ellipsoidpack.reporters.trajectory_reporter import TrajectoryReporter
from ellipsoidpack.sampler import SamplerKind, SamplerVariant, sample_lattice, vol_ball
from ellipsoidpack.utils.config import RunConfig
from ellipsoidpack.utils.seeding import make_rng, stream_id


logger = logging.getLogger("ellipsoidpack")


def build_lattice(config: RunConfig, rng: np.random.Generator) -> LatticeBasis:
    """
    Lattice named by ``config.lattice``, normalized to covolume Vol(B^n).

    Sampler sources draw from ``rng``; named and file sources do not touch it.
    """
    source = config.lattice
    n = config.n
    if source.startswith("file:"):
        lattice = LatticeBasis.from_file(source[5:])
        if lattice.n != n:
            raise UsageError(f"Lattice file has dimension {lattice.n}, expected n={n}")
        return normalize_covolume(lattice, vol_ball(n))
    if source in (SamplerVariant.EXACT2D.value, SamplerVariant.HECKE.value):
        kind = SamplerKind(SamplerVariant(source), p=config.p)
        return sample_lattice(n, kind, rng)
    return normalize_covolume(named_lattice(LatticeKind(source), n), vol_ball(n))


@dataclass
class EnsembleMember:
    """Outcome of one trajectory in an ensemble."""

    index: int
    stream_id: str
    trajectory: Optional[Trajectory] = None
    output_path: Optional[str] = None
    error: Optional[str] = None
    error_type: Optional[str] = None
    duration: float = 0.0

    @property
    def ok(self) -> bool:
        return self.trajectory is not None

    @property
    def usage_failure(self) -> bool:
        return self.error_type in (UsageError.__name__, DomainError.__name__)


def trajectory_filename(index: int) -> str:
    return f"trajectory_{index:05d}"


def run_member(config_data: Dict[str, Any], index: int, out_dir: Optional[str]) -> EnsembleMember:
    """
    Run trajectory ``index`` on its own stream; module-level so worker processes can pickle it.
    """
    config = RunConfig.from_dict(config_data)
    sid = stream_id(config.seed, index)
    start = time.time()
    try:
        rng = make_rng(config.seed, index)
        lattice = build_lattice(config, rng)
        trajectory = run(lattice, config.evolve_config(), rng, stream_id=sid)
        path = None
        if out_dir is not None:
            reporter = TrajectoryReporter(out_dir)
            path = str(reporter.generate_report(trajectory, trajectory_filename(index)))
        return EnsembleMember(
            index=index,
            stream_id=sid,
            trajectory=trajectory,
            output_path=path,
            duration=time.time() - start,
        )
    except Exception as e:
        return EnsembleMember(
            index=index,
            stream_id=sid,
            error=str(e),
            error_type=type(e).__name__,
            duration=time.time() - start,
        )


class EnsembleRunner:
    """Runs ``count`` trajectories with streams (seed, 0..count-1)."""

    def __init__(self, config: RunConfig, show_progress: bool = True):
        """
        Initialize runner.

        Args:
            config: Run configuration (count, workers, seed, ...)
            show_progress: Show a progress bar while running
        """
        config.validate()
        self.config = config
        self.show_progress = show_progress

    def _log_stream(self, index: int) -> None:
        sid = stream_id(self.config.seed, index)
        logger.info(
            f"Trajectory {index} uses stream {sid}",
            extra={"trajectory": index, "stream_id": sid, "seed": self.config.seed},
        )

    def run(self, out_dir: Optional[Path] = None) -> List[EnsembleMember]:
        """
        Run the ensemble.

        Args:
            out_dir: Directory for per-trajectory JSONL files (none written if None)

        Returns:
            Members sorted by trajectory index
        """
        count = self.config.count
        logger.info(f"Starting ensemble of {count} trajectories (n={self.config.n})")
        start_time = time.time()

        target = str(out_dir) if out_dir is not None else None
        if self.config.workers > 1 and count > 1:
            members = self._run_parallel(target)
        else:
            members = self._run_sequential(target)

        members.sort(key=lambda m: m.index)
        failed = [m for m in members if not m.ok]
        for member in failed:
            logger.error(f"Trajectory {member.index} failed: {member.error}")

        duration = time.time() - start_time
        logger.info(
            f"Completed {count - len(failed)}/{count} trajectories in {duration:.1f}s",
            extra={"duration": round(duration * 1000)},
        )
        return members

    def _progress(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TimeElapsedColumn(),
            TimeRemainingColumn(),
        )

    @staticmethod
    def _describe(member: EnsembleMember) -> str:
        if not member.ok:
            return f"[red]✗ #{member.index} (error)"
        return (
            f"[cyan]✓ #{member.index} {member.trajectory.termination.value} "
            f"({member.trajectory.final_state.contacts.count} contacts)"
        )

    def _run_sequential(self, out_dir: Optional[str]) -> List[EnsembleMember]:
        config_data = self.config.to_dict()
        members: List[EnsembleMember] = []

        if not self.show_progress:
            for index in range(self.config.count):
                self._log_stream(index)
                members.append(run_member(config_data, index, out_dir))
            return members

        with self._progress() as progress:
            task = progress.add_task(
                f"[cyan]Running {self.config.count} trajectories...", total=self.config.count
            )
            for index in range(self.config.count):
                self._log_stream(index)
                member = run_member(config_data, index, out_dir)
                members.append(member)
                progress.update(task, advance=1, description=self._describe(member))

        return members

    def _run_parallel(self, out_dir: Optional[str]) -> List[EnsembleMember]:
        config_data = self.config.to_dict()
        members: List[EnsembleMember] = []

        with ProcessPoolExecutor(max_workers=self.config.workers) as executor:
            futures = {}
            for index in range(self.config.count):
                self._log_stream(index)
                futures[executor.submit(run_member, config_data, index, out_dir)] = index

            if not self.show_progress:
                for future in as_completed(futures):
                    members.append(self._collect(future, futures[future]))
                return members

            with self._progress() as progress:
                task = progress.add_task(
                    f"[cyan]Running {self.config.count} trajectories...", total=self.config.count
                )
                for future in as_completed(futures):
                    member = self._collect(future, futures[future])
                    members.append(member)
                    progress.update(task, advance=1, description=self._describe(member))

        return members

    def _collect(self, future, index: int) -> EnsembleMember:
        try:
            return future.result()
        except Exception as e:
            return EnsembleMember(
                index=index,
                stream_id=stream_id(self.config.seed, index),
                error=str(e),
                error_type=type(e).__name__,
            )
