#!/usr/bin/env python3

# uv run ./scripts/check_acceptance.py results
"""
Check the experiment reports in a results directory against the accuracy
targets of the Snake benchmarks.

Reports that are missing (e.g. a skipped scaling run) are reported as skipped.
Exit status is 1 when any check fails.
"""

import csv
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from typed_crf.experiments import LOGIT, MULTI, MULTI_LOGIC, ORACLE, SINGLE

console = Console()


def read_report(path):
    """Rows of a report as dicts; ``n/a`` cells become ``None``."""
    with path.open(encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    rows = []
    for row in csv.DictReader(lines, delimiter="\t"):
        rows.append({k: (None if v == "n/a" else v) for k, v in row.items()})
    return rows


def value(rows, column, **match):
    for row in rows:
        if all(row[k] == str(v) for k, v in match.items()):
            if row[column] is None:
                break
            return float(row[column])
    raise click.ClickException(f"no {column} in the report for {match}")


def snake_checks(rows):
    snake_pixels = value(rows, "pixel_accuracy", dataset="snake", method=SINGLE)
    snake_cells = value(rows, "snake_cell_accuracy", dataset="snake", method=SINGLE)
    hidden_cells = value(rows, "snake_cell_accuracy", dataset="hidden", method=SINGLE)
    yield "single-type pixel accuracy on Snake >= 0.95", snake_pixels >= 0.95
    yield "single-type snake-cell accuracy on Snake >= 0.90", snake_cells >= 0.90
    yield "Hidden Snake is harder than Snake", hidden_cells < snake_cells
    yield "Hidden Snake snake-cell accuracy in [0.70, 0.92]", 0.70 <= hidden_cells <= 0.92
    oracle = value(rows, "pixel_accuracy", dataset="snake", method=ORACLE)
    yield "Snake oracle pixel accuracy within 0.05 of 0.733", abs(oracle - 0.733) <= 0.05


def hidden_checks(rows):
    single = value(rows, "snake_cell_accuracy", method=SINGLE)
    multi = value(rows, "snake_cell_accuracy", method=MULTI)
    constrained = value(rows, "snake_cell_accuracy", method=MULTI_LOGIC)
    yield "multi-type beats single-type by >= 0.03 snake-cell accuracy", multi >= single + 0.03
    yield "multi-type image accuracy >= 0.75", value(rows, "image_accuracy", method=MULTI) >= 0.75
    yield "logistic image accuracy < 0.60", value(rows, "image_accuracy", method=LOGIT) < 0.60
    yield "constraints cost at most 0.01 snake-cell accuracy", constrained >= multi - 0.01
    oracle = value(rows, "pixel_accuracy", method=ORACLE)
    yield "Hidden Snake oracle pixel accuracy within 0.05 of 0.857", abs(oracle - 0.857) <= 0.05


def scaling_checks(rows):
    sizes = sorted({int(row["train_size"]) for row in rows})
    for method in (SINGLE, MULTI, MULTI_LOGIC):
        means = [value(rows, "pixel_accuracy", method=method, train_size=s) for s in sizes]
        yield f"{method}: pixel accuracy grows with training size", means == sorted(means)
    for size in sizes:
        single = value(rows, "pixel_accuracy", method=SINGLE, train_size=size)
        multi = value(rows, "pixel_accuracy", method=MULTI, train_size=size)
        yield f"multi-type beats single-type by >= 0.02 at {size}", multi >= single + 0.02


CHECKS = {"snake": snake_checks, "hidden": hidden_checks, "scaling": scaling_checks}


@click.command()
@click.argument(
    "results", type=click.Path(exists=True, file_okay=False, path_type=Path), default="results"
)
def main(results):
    """Check the reports in RESULTS."""
    table = Table(title=f"Acceptance checks: {results}")
    table.add_column("Report")
    table.add_column("Check")
    table.add_column("Result")
    failed = 0
    for name, checks in CHECKS.items():
        path = results / f"{name}.tsv"
        if not path.exists():
            table.add_row(name, "report missing", "[yellow]skipped[/yellow]")
            continue
        for description, ok in checks(read_report(path)):
            failed += not ok
            table.add_row(name, description, "[green]ok[/green]" if ok else "[red]FAILED[/red]")
    console.print(table)
    if failed:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
