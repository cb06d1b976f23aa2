import itertools

import numpy as np
import pytest

from typed_crf import experiments
from typed_crf.config import ExperimentSettings, LogisticSettings
from typed_crf.errors import DimensionError, ExperimentError, UnsatisfiableError
from typed_crf.experiments import (
    COLUMNS,
    LOGIT,
    MULTI,
    MULTI_LOGIC,
    ORACLE,
    SINGLE,
    ExperimentReport,
    ReportRow,
    format_cell,
    image_score,
    metric_image_accuracy,
    metric_pixel_accuracy,
    metric_snake_cell_accuracy,
    predict_background,
    run_experiment_hidden,
    run_experiment_scaling,
    run_experiment_snake,
    score_row,
    snake_cell_score,
)
from typed_crf.learner import SsvmSettings
from typed_crf.snake_data import (
    Color,
    HiddenSnakeSample,
    ImageLabel,
    corrupt_cell,
    snake_from_moves,
)


@pytest.fixture()
def gold():
    img = snake_from_moves([Color.RIGHT] * 9)
    return [HiddenSnakeSample(img), corrupt_cell(img, (1, 5), Color.DOWN)]


@pytest.fixture()
def tiny(fast_admm):
    return ExperimentSettings(
        train_snakes=4,
        test_snakes=3,
        ssvm=SsvmSettings(epochs=1),
        admm=fast_admm,
        logistic=LogisticSettings(epochs=20),
        scaling_sizes=(2,),
        scaling_runs=2,
    )


# ------------------------- metrics -------------------------------------------


def test_metrics_of_the_background_prediction(gold):
    pred = predict_background(gold)
    assert metric_pixel_accuracy(pred, gold) == pytest.approx(62 / 72)
    assert metric_snake_cell_accuracy(pred, gold) == 0.0
    assert metric_image_accuracy(pred, gold) == 0.0
    assert metric_pixel_accuracy(gold, gold) == 1.0
    assert metric_image_accuracy(gold, gold) == 1.0


def test_metrics_without_snake_cells(gold):
    score = snake_cell_score(gold[1:], gold[1:])
    assert not score.defined
    assert score.value == 0.0
    assert not image_score([], []).defined


def test_metrics_reject_misaligned_predictions(gold):
    with pytest.raises(DimensionError):
        metric_pixel_accuracy(gold[:1], gold)
    other = HiddenSnakeSample(snake_from_moves([Color.DOWN] * 9))
    with pytest.raises(DimensionError):
        metric_pixel_accuracy([other], gold[:1])


def test_score_row_marks_unscored_columns(gold):
    row = score_row("hidden", ORACLE, predict_background(gold), gold, images=False)
    assert (row.pixels, row.snake_cells, row.images) == (72, 10, 2)
    assert row.image_accuracy is None
    row = score_row("hidden", LOGIT, gold, gold, pixels=False)
    assert row.pixel_accuracy is None and row.snake_cell_accuracy is None
    assert row.image_accuracy == 1.0


# ------------------------- reports -------------------------------------------


def test_format_cell():
    assert format_cell(None) == "n/a"
    assert format_cell(0.5) == "0.5000"
    assert format_cell(12) == "12"
    assert format_cell(MULTI) == MULTI


def test_report_tsv(tmp_path):
    row = ReportRow("snake", SINGLE, 36, 0.75, 10, 0.1, 1, None)
    report = ExperimentReport("snake", 3, rows=[row])
    lines = report.to_tsv().splitlines()
    assert lines[0] == "# experiment snake seed 3"
    assert lines[1].split("\t") == list(COLUMNS)
    cells = dict(zip(COLUMNS, lines[2].split("\t")))
    assert cells["pixel_accuracy"] == "0.7500"
    assert cells["image_accuracy"] == "n/a"
    assert cells["runs"] == "1"

    path = report.write(tmp_path / "out" / "snake.tsv")
    assert path.read_text() == report.to_tsv()


def test_failed_series_keeps_partial_report(monkeypatch, tiny):
    def broken(samples, settings):
        raise UnsatisfiableError("no labeling")

    monkeypatch.setattr(experiments, "train_single", broken)
    with pytest.raises(ExperimentError) as info:
        run_experiment_snake(1, tiny)
    report = info.value.report
    assert [row.method for row in report.rows] == [ORACLE]
    assert report.to_tsv().splitlines()[-1] == "# FAILED: UnsatisfiableError: no labeling"


# ------------------------- series --------------------------------------------


def test_hidden_series(tiny):
    report = run_experiment_hidden(5, tiny)
    assert [row.method for row in report.rows] == [ORACLE, SINGLE, LOGIT, MULTI, MULTI_LOGIC]
    assert {row.dataset for row in report.rows} == {"hidden"}
    by_method = {row.method: row for row in report.rows}
    assert by_method[ORACLE].image_accuracy is None
    assert by_method[SINGLE].image_accuracy is None
    assert by_method[LOGIT].pixel_accuracy is None
    assert by_method[MULTI].image_accuracy is not None
    for row in report.rows:
        assert row.pixel_accuracy is None or 0.0 <= row.pixel_accuracy <= 1.0

    for sample in report.predictions[f"hidden-{MULTI_LOGIC}"]:
        counts = np.bincount(sample.image.labels.ravel(), minlength=11)
        assert counts[1:].max() <= 1
        assert sample.image_label in (ImageLabel.SNAKE, ImageLabel.NO_SNAKE)


def test_hidden_series_is_reproducible(tiny):
    assert run_experiment_hidden(2, tiny).to_tsv() == run_experiment_hidden(2, tiny).to_tsv()


def test_snake_series(tiny):
    report = run_experiment_snake(0, tiny)
    assert [(row.dataset, row.method) for row in report.rows] == [
        ("snake", ORACLE),
        ("snake", SINGLE),
        ("hidden", ORACLE),
        ("hidden", SINGLE),
    ]
    assert report.rows[0].pixel_accuracy < 1.0
    assert set(report.gold) == {"snake", "hidden"}


@pytest.mark.slow
def test_scaling_series(tiny):
    report = run_experiment_scaling(0, tiny)
    assert [row.method for row in report.rows] == [SINGLE, MULTI, MULTI_LOGIC]
    assert all(row.train_size == 2 and row.runs == 2 for row in report.rows)
    assert len(report.seeds) == 2
    assert report.rows[0].compared_to is None
    assert report.rows[1].compared_to == SINGLE
    assert report.rows[2].compared_to == MULTI
    assert report.to_tsv().splitlines()[1].startswith("# run seeds ")


def test_scaling_keeps_finished_sizes(monkeypatch, tiny):
    counter = itertools.count()

    def scores(job):
        if job[0] == 3:
            raise UnsatisfiableError("no labeling")
        step = 0.01 * next(counter)
        return {SINGLE: 0.5 + step, MULTI: 0.6 + step, MULTI_LOGIC: 0.7 + step}

    monkeypatch.setattr(experiments, "_scaling_run", scores)
    with pytest.raises(ExperimentError) as info:
        run_experiment_scaling(0, tiny, sizes=[2, 3])
    report = info.value.report
    assert [(row.train_size, row.method) for row in report.rows] == [
        (2, SINGLE),
        (2, MULTI),
        (2, MULTI_LOGIC),
    ]
    assert report.rows[1].pixel_accuracy == pytest.approx(0.605)
    lines = report.to_tsv().splitlines()
    assert lines[-1] == "# FAILED: UnsatisfiableError: no labeling"
    assert lines[-2].split("\t")[1] == MULTI_LOGIC
