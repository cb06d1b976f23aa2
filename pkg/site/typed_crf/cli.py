"""Command line interface: ``typedcrf``."""

import functools
import logging
from dataclasses import replace
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from . import config
from .constraints import load_constraints
from .crf_model import load_weights, save_weights
from .errors import ExperimentError, InvalidArgumentError, TypedCrfError
from .experiments import (
    EXPERIMENTS,
    format_cell,
    image_score,
    pixel_score,
    predict_samples,
    snake_cell_score,
    train_multi,
    train_single,
)
from .log import setup_logging
from .snake_data import (
    SINGLE_TYPE_SCHEMA,
    TYPED_SCHEMA,
    build_hidden_dataset,
    build_snake_dataset,
    load_dataset,
    load_predictions,
    save_dataset,
    save_predictions,
)

logger = logging.getLogger(__name__)
console = Console()


def _handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except TypedCrfError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


seed_option = click.option(
    "--seed",
    type=int,
    default=config.default_seed,
    show_default=f"${config.SEED_ENV_VAR} or 0",
    help="Random seed.",
)
workers_option = click.option(
    "--workers",
    type=click.IntRange(min=1),
    default=config.default_workers,
    help="Worker processes.",
)
preset_options = [
    click.option(
        "--config",
        "config_file",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="YAML experiment presets.",
    ),
    click.option("--preset", default="default", show_default=True, help="Preset name."),
]


def with_presets(f):
    """Add the --config and --preset options."""
    for option in reversed(preset_options):
        f = option(f)
    return f


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logs.")
def cli(verbose):
    """Multi-type CRF toolkit and Snake benchmarks."""
    setup_logging(verbose)


@cli.command("gen-data")
@click.option("--count", type=click.IntRange(min=0), required=True, help="Number of snakes.")
@click.option("--hidden/--snake", default=False, help="Add corrupted NoSnake images.")
@seed_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def gen_data(count, hidden, seed, out):
    """Generate a Snake or Hidden Snake dataset."""
    builder = build_hidden_dataset if hidden else build_snake_dataset
    samples = builder(count, seed)
    save_dataset(samples, out)
    console.print(f"wrote {len(samples)} images to [bold]{out}[/bold]")


@cli.command()
@click.option("--model", "kind", type=click.Choice(["single", "multi"]), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--c", "c", type=float, default=1.0, show_default=True, help="Regularisation C.")
@click.option("--epochs", type=click.IntRange(min=1), default=30, show_default=True)
@seed_option
@workers_option
@with_presets
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def train(kind, data, c, epochs, seed, workers, config_file, preset, out):
    """Train a single-type or multi-type CRF by structured SVM."""
    settings = config.load_experiment_settings(config_file, preset).with_seed(seed)
    ssvm = replace(settings.ssvm, C=c, epochs=epochs, workers=workers)
    settings = replace(settings, ssvm=ssvm)
    samples = load_dataset(data)
    weights = (train_single if kind == "single" else train_multi)(samples, settings)
    save_weights(weights, out)
    console.print(f"wrote {weights.size} weights to [bold]{out}[/bold]")


def _model_kind(weights):
    if weights.schema == SINGLE_TYPE_SCHEMA:
        return "single"
    if weights.schema == TYPED_SCHEMA:
        return "multi"
    raise InvalidArgumentError("the model file does not hold a Snake model")


def _constraint_source(ctx, param, value):
    if value in ("none", "snake10"):
        return value
    return click.Path(exists=True, dir_okay=False, path_type=Path).convert(value, param, ctx)


@cli.command()
@click.option(
    "--model-file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True
)
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option(
    "--constraints",
    "constraint_spec",
    default="none",
    callback=_constraint_source,
    show_default=True,
    help="none, snake10, or a constraints file applied to every image.",
)
@workers_option
@with_presets
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def predict(model_file, data, constraint_spec, workers, config_file, preset, out):
    """Label every image of a dataset."""
    settings = config.load_experiment_settings(config_file, preset)
    weights = load_weights(model_file)
    if constraint_spec == "none":
        constraints = False
    elif constraint_spec == "snake10":
        constraints = True
    else:
        constraints = load_constraints(constraint_spec)
    samples = load_dataset(data)
    predictions = predict_samples(
        _model_kind(weights), weights, samples, settings, constraints, workers
    )
    save_predictions(predictions, out)
    console.print(f"wrote {len(predictions)} predictions to [bold]{out}[/bold]")


def _fmt(score, defined=True):
    return f"{score.value:.4f}" if defined and score.defined else "n/a"


@cli.command("eval")
@click.option("--pred", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@_handle_errors
def evaluate(pred, data):
    """Score a predictions file against its dataset."""
    predictions = load_predictions(pred)
    gold = load_dataset(data)
    has_images = any(p.image_label is not None for p in predictions)
    pixel = pixel_score(predictions, gold)
    snake = snake_cell_score(predictions, gold)
    image = image_score(predictions, gold)

    table = Table(title=str(pred))
    for column in ("#Pixels", "Pixel accuracy", "Pixel 1-10 accuracy", "#Images", "Image accuracy"):
        table.add_column(column, justify="right")
    table.add_row(
        str(pixel.support),
        _fmt(pixel),
        _fmt(snake),
        str(image.support),
        _fmt(image, has_images),
    )
    console.print(table)


@cli.command()
@click.argument("name", type=click.Choice(sorted(EXPERIMENTS)))
@seed_option
@click.option("--runs", type=click.IntRange(min=1), help="Runs per size (scaling).")
@click.option("--sizes", help="Comma separated training sizes (scaling).")
@workers_option
@with_presets
@click.option("--snake-only-test", is_flag=True, help="Score scaling runs on Snake images.")
@click.option("--dump-predictions", is_flag=True, help="Also write per-method predictions.")
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), default=Path("results"),
    show_default=True,
)
@_handle_errors
def experiment(
    name, seed, runs, sizes, workers, config_file, preset, snake_only_test, dump_predictions, out
):
    """Run an experiment series and write NAME.tsv to --out."""
    settings = config.load_experiment_settings(config_file, preset)
    settings = replace(settings, workers=workers)
    if snake_only_test:
        settings = replace(settings, snake_only_test=True)
    kwargs = {}
    if name == "scaling":
        if sizes:
            try:
                kwargs["sizes"] = [int(s) for s in sizes.split(",")]
            except ValueError as exc:
                raise click.BadParameter(f"not a list of integers: {sizes}") from exc
        kwargs["runs"] = runs
    path = out / f"{name}.tsv"
    try:
        report = EXPERIMENTS[name](seed, settings, **kwargs)
    except ExperimentError as exc:
        if exc.report is not None:
            exc.report.write(path)
            console.print(f"partial report written to [bold]{path}[/bold]")
        raise
    report.write(path)
    if dump_predictions:
        for key, samples in report.gold.items():
            save_predictions(samples, out / f"{name}-{key}-gold.txt")
        for key, samples in report.predictions.items():
            save_predictions(samples, out / f"{name}-{key.replace(' ', '_')}.txt")

    table = Table(title=f"{name} (seed {seed})")
    columns = (
        "dataset",
        "method",
        "train_size",
        "pixel_accuracy",
        "snake_cell_accuracy",
        "image_accuracy",
        "pixel_accuracy_std",
        "welch_p",
    )
    for column in columns:
        table.add_column(column)
    for row in report.rows:
        table.add_row(*(format_cell(getattr(row, c)) for c in columns))
    console.print(table)
    console.print(f"report written to [bold]{path}[/bold]")
