import functools
import json
import logging
import os
import sys
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from tqdm import tqdm

from ppqme import __version__
from ppqme.bath import check_weighting
from ppqme.config import DEFAULT_SWEEP_VALUES, SWEEP_PARAMETERS, RunConfig, load_config, output_dir
from ppqme.correlations import BathCorrelations
from ppqme.errors import PpqmeError, ValidationFailure
from ppqme.propagator import coherence_metric, prepare, propagate
from ppqme.validation import run_checks

load_dotenv()
logger = logging.getLogger("ppqme")

FLOAT_FORMAT = "%.12e"
INITIAL_STATE_NOTE = "sigma(0) given in the site basis with the bath in its untransformed thermal state"
COHERENCE_NOTE = "site coherences refer to the partially transformed frame"

SweepPoint = namedtuple("SweepPoint", ["value", "coherence_metric", "long_time_P1", "status"])


def exits_on_error(command):
    """Report structured errors as `error[code]: message [quantity]` and exit with the code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except PpqmeError as exc:
            click.echo(f"error[{exc.exit_code}]: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def build_correlations(config: RunConfig, allow_divergent_alpha: bool = False) -> BathCorrelations:
    model = config.density_model()
    weighting = config.weighting_function()
    check_weighting(model, weighting, allow_divergent_alpha)
    logger.info("Bath: %s, weighting %s, T=%g K", model.family, weighting.describe(), config.run.temperature_K)
    return BathCorrelations.from_model(
        model, weighting, config.run.temperature_K, config.quadrature_scheme(), t_max=config.run.t_max_fs
    )


def run_simulation(config: RunConfig, allow_divergent_alpha: bool = False, progress: bool = False):
    settings = config.settings()
    correlations = build_correlations(config, allow_divergent_alpha)
    problem = prepare(config.hamiltonian(), correlations, settings.grid)
    trajectory = propagate(problem, config.sigma0(), settings, progress=progress)
    return problem, trajectory


def write_run(config: RunConfig, problem, trajectory, csv_path: Path, json_path: Path, extra=None):
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.to_frame().to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)
    sidecar = {
        "version": __version__,
        "config": config.echo(),
        "frame": problem.frame.summary(),
        "diagnostics": trajectory.diagnostics(),
        "coherence_metric": coherence_metric(trajectory),
        "initial_state": INITIAL_STATE_NOTE,
        "site_coherences": COHERENCE_NOTE,
    }
    sidecar.update(extra or {})
    with open(json_path, "w") as f:
        json.dump(sidecar, f, indent=2)
    logger.info("Wrote %s and %s", csv_path, json_path)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level.")
@click.version_option(__version__)
def cli(verbose):
    """Second-order time-local quantum master equation in a partially polaron-transformed frame."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(show_path=False, console=Console(stderr=True))],
        force=True,
    )


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="YAML run configuration.")
@click.option("--out", "out_dir", default=None, help="Output directory (default $PPQME_OUTPUT_DIR or .).")
@click.option("--allow-divergent-alpha", is_flag=True, help="Run smooth weightings with alpha <= 1.")
@exits_on_error
def simulate(config_path, out_dir, allow_divergent_alpha):
    """Propagate one configuration and write the trajectory CSV and JSON sidecar."""
    config = load_config(config_path)
    out = output_dir(out_dir)
    problem, trajectory = run_simulation(config, allow_divergent_alpha, progress=True)
    csv_path = Path(config.output.csv_path) if config.output.csv_path else out / "trajectory.csv"
    json_path = Path(config.output.json_path) if config.output.json_path else csv_path.with_suffix(".json")
    write_run(config, problem, trajectory, csv_path, json_path)
    click.echo(f"coherence_metric={coherence_metric(trajectory):.6f} P1(t_max)={trajectory.populations[-1, 0]:.6f}")


def _parse_values(values, param):
    if values is None:
        if param not in DEFAULT_SWEEP_VALUES:
            raise click.BadParameter(f"--values is required for {param}", param_hint="--values")
        return list(DEFAULT_SWEEP_VALUES[param])
    try:
        return [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of numbers: {values!r}", param_hint="--values")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--param", type=click.Choice(SWEEP_PARAMETERS), required=True, help="Weighting parameter to sweep.")
@click.option("--values", default=None, help="Comma-separated values; omega_h values are ratios to omega_c.")
@click.option("--out", "out_dir", default=None)
@click.option("--workers", type=int, default=lambda: int(os.getenv("PPQME_WORKERS", "1")), show_default="1")
@click.option("--allow-divergent-alpha", is_flag=True)
@exits_on_error
def sweep(config_path, param, values, out_dir, workers, allow_divergent_alpha):
    """One trajectory per parameter value plus a summary of the coherence metric."""
    config = load_config(config_path)
    values = _parse_values(values, param)
    if not values:
        logger.warning("Empty values list, nothing to sweep")
        return
    out = output_dir(out_dir)

    def run_point(value):
        try:
            point = config.with_parameter(param, value)
            problem, trajectory = run_simulation(point, allow_divergent_alpha)
            stem = f"{param}_{value:g}"
            write_run(point, problem, trajectory, out / f"{stem}.csv", out / f"{stem}.json", {param: value})
            return SweepPoint(value, coherence_metric(trajectory), trajectory.populations[-1, 0], "ok"), None
        except PpqmeError as exc:
            logger.error("%s=%g failed: %s", param, value, exc)
            return SweepPoint(value, np.nan, np.nan, f"error[{exc.exit_code}]: {exc}"), exc
        except Exception as exc:
            # one broken point must not discard the rest of the sweep
            logger.exception("%s=%g failed unexpectedly", param, value)
            failure = PpqmeError(f"{type(exc).__name__}: {exc}", quantity=f"{param}={value:g}")
            failure.__cause__ = exc
            return SweepPoint(value, np.nan, np.nan, f"error[{failure.exit_code}]: {failure}"), failure

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        outcomes = list(tqdm(executor.map(run_point, values), total=len(values), desc=f"sweep {param}"))

    summary = pd.DataFrame([point for point, _ in outcomes])
    summary.insert(0, "parameter", param)
    out.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out / f"sweep_{param}.csv", index=False, float_format=FLOAT_FORMAT)
    for point, _ in outcomes:
        click.echo(f"{param}={point.value:g} coherence_metric={point.coherence_metric:.6f} {point.status}")

    failures = [exc for _, exc in outcomes if exc is not None]
    if failures:
        raise failures[0]


@cli.command("dump-correlations")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", default=None)
@click.option("--allow-divergent-alpha", is_flag=True)
@exits_on_error
def dump_correlations(config_path, out_dir, allow_divergent_alpha):
    """Write K, M, C, f and h on the half-step time grid without propagating."""
    config = load_config(config_path)
    correlations = build_correlations(config, allow_divergent_alpha)
    tables = correlations.build_tables(config.settings().grid)

    columns = {"t_fs": tables.times}
    for name, values in tables.named_columns().items():
        if np.iscomplexobj(values):
            columns[f"re_{name}"] = values.real
            columns[f"im_{name}"] = values.imag
        else:
            columns[name] = values
    out = output_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(out / "correlations.csv", index=False, float_format=FLOAT_FORMAT)
    with open(out / "correlations.json", "w") as f:
        sidecar = {
            "version": __version__,
            "config": config.echo(),
            "debye_waller": tables.debye_waller.tolist(),
            "energy_shift_cm1": tables.energy_shift.tolist(),
        }
        json.dump(sidecar, f, indent=2)
    click.echo(f"Wrote {len(columns) - 1} columns x {tables.times.size} rows to {out / 'correlations.csv'}")


@cli.command()
@click.option("--corrupt-w", is_flag=True, hidden=True)
@exits_on_error
def validate(corrupt_w):
    """Run the built-in check suite and report residuals."""
    results = run_checks(corrupt_w=corrupt_w)

    table = Table(title="ppqme validation")
    for column in ("check", "status", "residual", "tolerance", "detail"):
        table.add_column(column)
    for result in results:
        status = "[green]pass[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(result.name, status, f"{result.residual:.3e}", f"{result.tolerance:.1e}", result.detail)
    Console(width=160).print(table)

    failed = [result.name for result in results if not result.passed]
    if failed:
        raise ValidationFailure(f"{len(failed)} of {len(results)} checks failed", quantity=", ".join(failed))
    click.echo(f"all {len(results)} checks passed")
