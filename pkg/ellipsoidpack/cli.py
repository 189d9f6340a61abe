"""Command-line interface for ellipsoidpack."""

import sys
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from ellipsoidpack.__version__ import __version__
from ellipsoidpack.analysis import density_report, ensemble_stats, packing_lattice, shell_integral
from ellipsoidpack.ensemble import EnsembleRunner, build_lattice, trajectory_filename
from ellipsoidpack.errors import DiscretizationError, DomainError, ResourceError, UsageError
from ellipsoidpack.evolve import paper_a0, run as run_trajectory
from ellipsoidpack.lattice import LatticeBasis
from ellipsoidpack.models import DensityReport, Status, VerificationSummary
from ellipsoidpack.reporters import (
    CSVReporter,
    HTMLReporter,
    JSONReporter,
    MarkdownReporter,
    TrajectoryReporter,
)
from ellipsoidpack.sampler import RadialTestFunction, SamplerKind, SamplerVariant, siegel_mc
from ellipsoidpack.utils.config import LATTICE_CHOICES, SUITE_CHOICES, RunConfig
from ellipsoidpack.utils.logging import setup_logger
from ellipsoidpack.utils.seeding import make_rng, stream_id
from ellipsoidpack.verify import run_suite


console = Console()
logger = None

DEFAULT_OUT = "./results"

EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INTERRUPTED = 130


def _exit_code(error: BaseException) -> int:
    if isinstance(error, (ResourceError, DiscretizationError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(error, np.linalg.LinAlgError):
        return EXIT_NUMERIC
    return EXIT_USAGE


def _fail(ctx, error: BaseException) -> None:
    console.print(f"\n[red]Error: {error}[/red]")
    if ctx.obj.get("verbose"):
        console.print_exception()
    sys.exit(_exit_code(error))


def _final_density(a, lattice) -> Tuple[DensityReport, LatticeBasis]:
    """Density report and packing lattice of a finished run; domain failures are numeric here."""
    try:
        return density_report(a, lattice), packing_lattice(a, lattice)
    except DomainError as e:
        raise DiscretizationError(f"Final state failed the density check: {e}") from e


def _load_config(ctx, config_path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """File settings first, then explicitly given flags on top."""
    cfg = RunConfig.from_file(config_path) if config_path else RunConfig()
    if config_path:
        logger.debug(f"Loaded configuration from {config_path}")
    overrides = dict(overrides)
    overrides["verbose"] = ctx.obj.get("verbose") or None
    overrides["json_logs"] = ctx.obj.get("json_logs") or None
    cfg = cfg.merge(overrides)
    cfg.validate()
    return cfg


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def config_option(func):
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        help="Configuration file (.yml, .yaml, .json, or flat key = value text)",
    )(func)


def lattice_options(func):
    """--n, --lattice, --p, --seed, --out."""
    options = [
        click.option("--n", "n", type=int, default=None, help="Dimension (default 2)"),
        click.option(
            "--lattice",
            default=None,
            help=f"Lattice source: {'|'.join(LATTICE_CHOICES)}|file:PATH (default Zn)",
        ),
        click.option("--p", "p", type=int, default=None, help="Prime for hecke (default >= n^4)"),
        click.option("--seed", type=int, default=None, help="Root seed, unsigned 64-bit (default 0)"),
        click.option("--out", default=None, help=f"Output directory (default {DEFAULT_OUT})"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def evolve_options(func):
    """Step control and process parameters."""
    options = [
        click.option("--dt-max", type=float, default=None, help="Largest step (default T/2000)"),
        click.option("--dt-min", type=float, default=None, help="Smallest step (default dt_max*1e-6)"),
        click.option("--eps-contact", type=float, default=None, help="Contact tolerance (1e-9)"),
        click.option("--eta", type=float, default=None, help="Watch-list margin, 0 < eta <= 1"),
        click.option("--alpha", type=float, default=None, help="Drift exponent for A^alpha (0)"),
        click.option("--a0", default=None, help="Starting scale: number|paper|auto (paper)"),
        click.option("--a0-margin", type=float, default=None, help="Margin for --a0 auto (0.05)"),
        click.option(
            "--max-time", default=None, help="Time limit: number|paper (default 100*T)"
        ),
        click.option("--renorm-period", type=int, default=None, help="Steps between renorms (50)"),
        click.option(
            "--record-stride", type=int, default=None, help="Record every K-th accepted step (1)"
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(version=__version__, prog_name="ellipsoidpack")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.option(
    "--json-logs", is_flag=True, help="Use structured JSON logging (for automation)"
)
@click.pass_context
def cli(ctx, verbose, json_logs):
    """ellipsoidpack - evolving ellipsoids for lattice sphere packing."""
    global logger
    logger = setup_logger(verbose=verbose, json_format=json_logs)
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["json_logs"] = json_logs


@cli.command()
@config_option
@lattice_options
@evolve_options
@click.pass_context
def run(ctx, config, **flags):
    """
    Run one trajectory until frozen or max-time.

    Writes trajectory.jsonl, density.json, packing_lattice.basis and
    manifest.json to the output directory.
    """
    try:
        cfg = _load_config(ctx, config, flags)
        out_dir = Path(cfg.out or DEFAULT_OUT)
        started_at = _timestamp()

        sid = stream_id(cfg.seed)
        rng = make_rng(cfg.seed)
        lattice = build_lattice(cfg, rng)
        console.print(
            f"\n[bold blue]Evolving ellipsoid[/bold blue] n={cfg.n} lattice={cfg.lattice} "
            f"seed={cfg.seed}\n"
        )
        trajectory = run_trajectory(lattice, cfg.evolve_config(), rng, stream_id=sid)
        state = trajectory.final_state
        report, packing = _final_density(state.a, lattice)

        TrajectoryReporter(out_dir).generate_report(trajectory, "trajectory")
        json_reporter = JSONReporter(out_dir)
        json_reporter.generate_report(report, "density", report_type="density")
        packing.to_file(
            out_dir / "packing_lattice.basis",
            comment=f"covolume-one packing lattice, n={cfg.n} seed={cfg.seed}",
        )
        json_reporter.generate_report(
            {
                "config": cfg.to_dict(),
                "started_at": started_at,
                "finished_at": _timestamp(),
                "version": __version__,
                "seed": cfg.seed,
                "stream_id": sid,
                "termination": trajectory.termination.value,
            },
            "manifest",
            report_type="manifest",
        )

        _display_run(trajectory, report)
        console.print(f"\n[green]✅ Wrote results to {out_dir}[/green]\n")

    except KeyboardInterrupt:
        console.print("\n[yellow]Run cancelled by user[/yellow]")
        sys.exit(EXIT_INTERRUPTED)

    except Exception as e:
        _fail(ctx, e)


@cli.command()
@config_option
@lattice_options
@evolve_options
@click.option("--count", type=int, default=None, help="Number of trajectories (10)")
@click.option("--workers", type=int, default=None, help="Worker processes (1)")
@click.pass_context
def ensemble(ctx, config, **flags):
    """
    Run COUNT independent trajectories on streams (seed, i).

    Writes one JSONL per trajectory, ensemble.csv (512 grid rows),
    summary.json and report.html.
    """
    try:
        cfg = _load_config(ctx, config, flags)
        out_dir = Path(cfg.out or DEFAULT_OUT)

        console.print(
            f"\n[bold blue]Ensemble[/bold blue] of {cfg.count} trajectories, n={cfg.n} "
            f"lattice={cfg.lattice} seed={cfg.seed}\n"
        )
        runner = EnsembleRunner(cfg, show_progress=not ctx.obj.get("json_logs"))
        members = runner.run(out_dir)

        succeeded = [m for m in members if m.ok]
        failed = [m for m in members if not m.ok]

        if succeeded:
            summary = ensemble_stats([m.trajectory for m in succeeded], horizon=cfg.horizon)
            summary.metadata.update(
                {
                    "seed": cfg.seed,
                    "lattice": cfg.lattice,
                    "version": __version__,
                    "failed": [m.index for m in failed],
                    "files": [trajectory_filename(m.index) + ".jsonl" for m in succeeded],
                }
            )
            console.print("\n[bold]Generating reports...[/bold]\n")
            _generate_ensemble_reports(summary, cfg, out_dir)
            _display_ensemble(summary)

        if failed:
            for member in failed:
                console.print(
                    f"[red]✗ Trajectory {member.index} ({member.stream_id}): "
                    f"{member.error_type}: {member.error}[/red]"
                )
            code = EXIT_USAGE if any(m.usage_failure for m in failed) else EXIT_NUMERIC
            sys.exit(code)

        console.print(f"\n[green]✅ Ensemble complete: {out_dir}[/green]\n")

    except KeyboardInterrupt:
        console.print("\n[yellow]Ensemble cancelled by user[/yellow]")
        sys.exit(EXIT_INTERRUPTED)

    except Exception as e:
        _fail(ctx, e)


@cli.command()
@config_option
@click.option(
    "--suite",
    type=click.Choice(SUITE_CHOICES),
    default=None,
    help="Verification suite (default all)",
)
@click.option("--samples", type=int, default=None, help="Monte Carlo samples per check (10000)")
@click.option("--seed", type=int, default=None, help="Root seed (0)")
@click.option("--out", default=None, help="Write verification.md to this directory")
@click.pass_context
def verify(ctx, config, **flags):
    """Run invariant checks; exit 1 if any fails."""
    try:
        cfg = _load_config(ctx, config, flags)
        console.print(f"\n[bold blue]Verification suite:[/bold blue] {cfg.suite}\n")

        summary = run_suite(cfg.suite, seed=cfg.seed, samples=cfg.samples)
        _display_verification(summary)

        if cfg.out:
            path = MarkdownReporter(cfg.out).generate_report(summary)
            console.print(f"\n  ✓ Markdown: {path}")

        failure = summary.first_failure
        if failure is not None:
            console.print(f"\n[red]❌ First failure: {failure.name}: {failure.message}[/red]")
            sys.exit(EXIT_FAILURE)

        console.print("\n[green]✅ All checks passed[/green]\n")

    except KeyboardInterrupt:
        console.print("\n[yellow]Verification cancelled by user[/yellow]")
        sys.exit(EXIT_INTERRUPTED)

    except Exception as e:
        _fail(ctx, e)


def _sampler_for(cfg: RunConfig) -> SamplerKind:
    if cfg.lattice == SamplerVariant.EXACT2D.value:
        return SamplerKind.exact2d()
    if cfg.lattice == SamplerVariant.HECKE.value:
        return SamplerKind.hecke(cfg.p)
    kind = SamplerKind.exact2d() if cfg.n == 2 else SamplerKind.hecke(cfg.p)
    logger.debug(f"Lattice source '{cfg.lattice}' is not a sampler; using {kind.label}")
    return kind


@cli.command()
@config_option
@click.option("--n", "n", type=int, default=None, help="Dimension (default 2)")
@click.option("--lattice", default=None, help="Sampler: exact2d|hecke (default exact2d at n=2)")
@click.option("--p", "p", type=int, default=None, help="Prime for hecke (default >= n^4)")
@click.option("--seed", type=int, default=None, help="Root seed (0)")
@click.option("--samples", type=int, default=None, help="Sampled lattices (10000)")
@click.option("--radius", type=float, default=None, help="Ball radius of the test function")
@click.option("--out", default=None, help="Also write siegel.json to this directory")
@click.pass_context
def siegel(ctx, config, **flags):
    """Monte Carlo check of the Siegel summation formula; prints one JSON line."""
    try:
        cfg = _load_config(ctx, config, flags)
        radius = cfg.radius if cfg.radius is not None else 1.0 - 1.0 / cfg.n
        kind = _sampler_for(cfg)
        result = siegel_mc(
            cfg.n, kind, RadialTestFunction.ball(radius), cfg.samples, make_rng(cfg.seed)
        )
        data = result.to_dict()
        data["radius"] = radius
        click.echo(json.dumps(data))
        if cfg.out:
            JSONReporter(cfg.out).generate_report(data, "siegel", report_type="siegel")

    except KeyboardInterrupt:
        console.print("\n[yellow]Sampling cancelled by user[/yellow]")
        sys.exit(EXIT_INTERRUPTED)

    except Exception as e:
        _fail(ctx, e)


@cli.command("shell-integral")
@config_option
@click.option("--n", "n", type=int, default=None, help="Dimension (default 2)")
@click.option("--t", "t", type=float, default=None, help="Time (default 16 n^-2 log n)")
@click.option("--a0", default=None, help="Starting scale: number|paper (paper)")
@click.option("--c0", type=float, default=None, help="Operator-norm tail constant (2.0)")
@click.option(
    "--truncate",
    is_flag=True,
    help="Cap the range at half the singularity instead of failing",
)
@click.option("--out", default=None, help="Also write shell_integral.json to this directory")
@click.pass_context
def shell_integral_cmd(ctx, config, truncate, **flags):
    """Shell integral over Vol(B^n) by 1-D quadrature; prints one JSON line."""
    try:
        flags["truncate"] = True if truncate else None
        cfg = _load_config(ctx, config, flags)
        if cfg.a0 == "auto":
            raise UsageError("shell-integral takes a numeric a0 or 'paper'")
        a0 = paper_a0(cfg.n) if cfg.a0 == "paper" else float(cfg.a0)
        t = cfg.t if cfg.t is not None else cfg.horizon
        result = shell_integral(cfg.n, t, a0, c0=cfg.c0, truncate=cfg.truncate)
        data = result.to_dict()
        click.echo(json.dumps(data))
        if cfg.out:
            JSONReporter(cfg.out).generate_report(
                data, "shell_integral", report_type="shell_integral"
            )

    except KeyboardInterrupt:
        console.print("\n[yellow]Integration cancelled by user[/yellow]")
        sys.exit(EXIT_INTERRUPTED)

    except Exception as e:
        _fail(ctx, e)


def _display_run(trajectory, report) -> None:
    """Display the final state of one trajectory."""
    state = trajectory.final_state
    console.print("[bold]📊 Final state[/bold]\n")
    console.print(f"  Termination:      {trajectory.termination.value}")
    console.print(f"  Time:             {state.t:.6g}")
    console.print(f"  Steps:            {state.steps}")
    console.print(f"  Contacts:         {state.contacts.count}")
    console.print(f"  dim F:            {state.dim_f}")
    console.print(f"  log det A:        {report.log_det:.6f}")
    console.print(f"  Vol(E)/Vol(B^n):  {report.final_volume_ratio:.6f}")
    console.print(f"  Packing density:  {report.packing_density:.6g}")


def _display_ensemble(summary) -> None:
    """Display ensemble statistics."""
    console.print("\n[bold]📊 Ensemble Summary[/bold]\n")
    console.print(f"  Trajectories:       {summary.count}")
    console.print(f"  Frozen:             {summary.frozen_count}")
    console.print(f"  Timed out:          {summary.timeout_count}")
    console.print(
        f"  Final log det A:    {summary.mean_final_logdet:.6f} ± {summary.se_final_logdet:.2g}"
    )
    console.print(f"  Mean Vol(E)/Vol(B): {summary.mean_volume_ratio:.6f}")


def _generate_ensemble_reports(summary, cfg: RunConfig, out_dir: Path) -> List[Path]:
    """CSV, JSON and HTML outputs of an ensemble."""
    paths: List[Path] = []
    writers = [
        ("CSV", lambda: CSVReporter(out_dir).generate_report(summary, "ensemble")),
        (
            "JSON",
            lambda: JSONReporter(out_dir).generate_report(summary, "summary", "ensemble"),
        ),
        (
            "HTML",
            lambda: HTMLReporter(out_dir).generate_report(summary, "report", cfg.to_dict()),
        ),
    ]
    for label, write in writers:
        path = write()
        paths.append(path)
        console.print(f"  ✓ {label}: {path}")
    return paths


def _display_verification(summary: VerificationSummary) -> None:
    """Display check results as a table."""
    table = Table(title=f"Suite: {summary.suite}")
    table.add_column("Check", style="cyan")
    table.add_column("Status")
    table.add_column("Message")

    colors = {
        Status.PASS: "green",
        Status.FAIL: "red",
        Status.ERROR: "red",
        Status.SKIP: "yellow",
    }
    for check in summary.checks:
        color = colors[check.status]
        table.add_row(check.name, f"[{color}]{check.status.value}[/{color}]", check.message)

    console.print(table)
    counts = summary.get_status_counts()
    console.print(
        "  " + "  ".join(f"{status}: {count}" for status, count in counts.items() if count)
    )


if __name__ == "__main__":
    cli()
