import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError

from ikg.errors import ConfigError, ConvergenceError
from ikg.services.acquisition import PolicyChoice
from ikg.services.gaussian_model import load_instance
from ikg.services.harness import load_config, run_experiment
from ikg.services.presets import list_presets, resolve_instance
from ikg.services.rates import allocation_for, brute_force_allocation
from ikg.services.reports import write_all

app = typer.Typer(
    help="iKG sampling policies, allocation rates and PFS experiments.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)

logger = logging.getLogger(__name__)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log progress to stderr.")):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@contextmanager
def _exit_codes():
    try:
        yield
    except ConvergenceError as e:
        typer.echo(f"ikg-error[convergence]: {e}", err=True)
        raise typer.Exit(code=1)
    except ConfigError as e:
        typer.echo(f"ikg-error[config]: {e}", err=True)
        raise typer.Exit(code=2)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e


def _instance_from_flags(preset: Optional[str], goal: Optional[str], instance_file: Optional[Path]):
    if instance_file is not None:
        if preset is not None:
            raise ConfigError("give either --preset or --instance, not both")
        return load_instance(_read_json(instance_file))
    return resolve_instance(preset, goal)


@app.command()
def rates(
    preset: Optional[str] = typer.Option(None, "--preset", help="Preset name, or name/goal."),
    goal: Optional[str] = typer.Option(None, "--goal", help="bai, eps_good or feasible."),
    instance_file: Optional[Path] = typer.Option(None, "--instance", help="JSON problem instance."),
    policy: str = typer.Option("ikg", "--policy", help="kg, ikg, ttei, equal, ikg_eps or ikg_f."),
    beta: Optional[float] = typer.Option(None, "--beta", help="TTEI best-arm probability."),
):
    """Print the limiting allocation and rate of a policy as JSON."""
    with _exit_codes():
        try:
            choice = PolicyChoice(name=policy, beta=beta)
        except ValidationError as e:
            raise ConfigError(f"invalid policy: {e.errors(include_url=False)}") from e
        instance = _instance_from_flags(preset, goal, instance_file)
        report = allocation_for(instance, choice.name, choice.beta).to_report()
        typer.echo(json.dumps(report, indent=2))


@app.command()
def oracle(
    preset: Optional[str] = typer.Option(None, "--preset", help="Preset name, or name/goal."),
    goal: Optional[str] = typer.Option(None, "--goal", help="bai, eps_good or feasible."),
    instance_file: Optional[Path] = typer.Option(None, "--instance", help="JSON problem instance."),
    grid: float = typer.Option(0.01, "--grid", help="Simplex grid spacing."),
):
    """Brute-force the best allocation over a simplex grid."""
    with _exit_codes():
        instance = _instance_from_flags(preset, goal, instance_file)
        typer.echo(json.dumps(brute_force_allocation(instance, grid).to_report(), indent=2))


@app.command()
def run(
    config: Path = typer.Option(..., "--config", help="Experiment config JSON."),
    out: Path = typer.Option(..., "--out", help="Output directory."),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker processes."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override base_seed."),
):
    """Run an experiment and write results.csv, sampling_rates.csv and result.json."""
    with _exit_codes():
        data = _read_json(config)
        if threads is not None:
            data["parallelism"] = threads
        if seed is not None:
            data["base_seed"] = seed
        result = run_experiment(load_config(data))
        for path in write_all(result, out):
            typer.echo(str(path))


@app.command()
def presets():
    """List built-in problems with their ground-truth targets."""
    for row in list_presets():
        typer.echo(f"{row['name']} {row['goal']} {row['target']} k={row['k']} m={row['m']}")


if __name__ == "__main__":
    app()
