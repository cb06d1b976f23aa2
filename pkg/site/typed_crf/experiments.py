"""Metrics, reports and the three Snake experiment series."""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import ttest_ind

from .config import ExperimentSettings
from .crf_model import predict
from .errors import DimensionError, ExperimentError, TypedCrfError
from .learner import predict_logistic, train_logistic, train_ssvm
from .snake_data import (
    SINGLE_TYPE_SCHEMA,
    TYPED_SCHEMA,
    HiddenSnakeSample,
    ImageLabel,
    SnakeImage,
    build_hidden_dataset,
    build_single_type_instance,
    build_snake_dataset,
    build_typed_instance,
    featurize_image,
    make_constraints,
)

logger = logging.getLogger(__name__)

ORACLE = "all-background oracle"
SINGLE = "single-type CRF"
LOGIT = "logistic regression"
MULTI = "multi-type CRF"
MULTI_LOGIC = "multi-type CRF + constraints"

# ------------------------- metrics -------------------------------------------


@dataclass(frozen=True)
class Score:
    """An accuracy and the number of items it was computed on."""

    value: float
    support: int

    @property
    def defined(self):
        return self.support > 0


def _aligned(pred, gold):
    if len(pred) != len(gold):
        raise DimensionError(f"{len(pred)} predictions for {len(gold)} samples")
    for p, g in zip(pred, gold):
        if p.image.labels.shape != g.image.labels.shape:
            raise DimensionError(
                f"prediction grid {p.image.labels.shape} != gold grid {g.image.labels.shape}"
            )
    return zip(pred, gold)


def pixel_score(pred, gold):
    """Correct pixels over all pixels."""
    correct = total = 0
    for p, g in _aligned(pred, gold):
        correct += int(np.count_nonzero(p.image.labels == g.image.labels))
        total += g.image.labels.size
    return Score(correct / total if total else 0.0, total)


def snake_cell_score(pred, gold):
    """Accuracy over cells whose gold label is a snake label (1..10)."""
    correct = total = 0
    for p, g in _aligned(pred, gold):
        snake = g.image.labels > 0
        correct += int(np.count_nonzero(p.image.labels[snake] == g.image.labels[snake]))
        total += int(np.count_nonzero(snake))
    return Score(correct / total if total else 0.0, total)


def image_score(pred, gold):
    """Correct image labels; undefined without images."""
    if len(pred) != len(gold):
        raise DimensionError(f"{len(pred)} predictions for {len(gold)} samples")
    correct = sum(p.image_label == g.image_label for p, g in zip(pred, gold))
    return Score(correct / len(gold) if gold else 0.0, len(gold))


def metric_pixel_accuracy(pred, gold):
    """Fraction of cells whose predicted label is the gold label."""
    return pixel_score(pred, gold).value


def metric_snake_cell_accuracy(pred, gold):
    """0.0 when the gold data has no snake cells; see :func:`snake_cell_score`."""
    return snake_cell_score(pred, gold).value


def metric_image_accuracy(pred, gold):
    """Fraction of images whose Snake or NoSnake label is right."""
    return image_score(pred, gold).value


# ------------------------- reports -------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    method: str
    pixels: int
    pixel_accuracy: float | None
    snake_cells: int
    snake_cell_accuracy: float | None
    images: int
    image_accuracy: float | None
    train_size: int | None = None
    runs: int = 1
    pixel_accuracy_std: float | None = None
    welch_p: float | None = None
    compared_to: str | None = None
    seconds: float = 0.0


COLUMNS = (
    "dataset",
    "method",
    "train_size",
    "runs",
    "pixels",
    "pixel_accuracy",
    "pixel_accuracy_std",
    "snake_cells",
    "snake_cell_accuracy",
    "images",
    "image_accuracy",
    "welch_p",
    "compared_to",
)


def format_cell(value):
    """TSV text of a report value; ``None`` is ``n/a``."""
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


@dataclass
class ExperimentReport:
    """Rows of one experiment series.

    Wall-clock times stay in memory (and in the log) so that a report file
    only depends on the seed and the settings.
    """

    name: str
    seed: int
    rows: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    failure: str | None = None
    predictions: dict = field(default_factory=dict)
    gold: dict = field(default_factory=dict)

    def to_tsv(self):
        lines = [f"# experiment {self.name} seed {self.seed}"]
        if self.seeds:
            lines.append("# run seeds " + " ".join(str(s) for s in self.seeds))
        lines.append("\t".join(COLUMNS))
        for row in self.rows:
            lines.append("\t".join(format_cell(getattr(row, c)) for c in COLUMNS))
        if self.failure is not None:
            lines.append(f"# FAILED: {self.failure}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_tsv(), encoding="utf-8")
        return path


def score_row(dataset, method, pred, gold, pixels=True, images=True, seconds=0.0):
    """Report row of ``pred`` against ``gold``; unscored columns are n/a."""
    pixel = pixel_score(pred, gold)
    snake = snake_cell_score(pred, gold)
    image = image_score(pred, gold)
    return ReportRow(
        dataset=dataset,
        method=method,
        pixels=pixel.support,
        pixel_accuracy=pixel.value if pixels else None,
        snake_cells=snake.support,
        snake_cell_accuracy=snake.value if pixels else None,
        images=image.support,
        image_accuracy=image.value if images else None,
        seconds=seconds,
    )


# ------------------------- methods -------------------------------------------


def _as_prediction(sample, pixel_labels, image_label):
    img = sample.image
    labels = np.asarray(pixel_labels).reshape(img.labels.shape)
    return HiddenSnakeSample(SnakeImage(img.colors, labels), image_label)


def predict_background(samples):
    """Every cell background, no image label."""
    return [
        _as_prediction(s, np.zeros(s.image.labels.size, np.int64), None) for s in samples
    ]


def train_single(samples, settings):
    """Single-type grid CRF trained on ``samples``."""
    data = [build_single_type_instance(s) for s in samples]
    return train_ssvm(data, SINGLE_TYPE_SCHEMA, settings.ssvm, settings.admm)


def train_multi(samples, settings):
    """Two-type CRF (pixels plus image node) trained on ``samples``."""
    data = [build_typed_instance(s) for s in samples]
    return train_ssvm(data, TYPED_SCHEMA, settings.ssvm, settings.admm)


def _predict_one(job):
    kind, sample, weights, admm, constrained = job
    if constrained is True:
        constraints = make_constraints(sample)
    else:
        constraints = tuple(constrained or ())
    if kind == "single":
        g, _ = build_single_type_instance(sample)
        y = predict(g, weights, admm, constraints)
        return _as_prediction(sample, y[0], None)
    g, _ = build_typed_instance(sample)
    y = predict(g, weights, admm, constraints)
    image_label = ImageLabel.SNAKE if y[1][0] == 0 else ImageLabel.NO_SNAKE
    return _as_prediction(sample, y[0], image_label)


def predict_samples(kind, weights, samples, settings, constrained=False, workers=1):
    """Predictions of a ``"single"`` or ``"multi"`` model, in sample order.

    ``constrained`` is ``True`` for the ten snake-label constraints of every
    sample, or a list of constraints applied to every sample.
    """
    jobs = [(kind, s, weights, settings.admm, constrained) for s in samples]
    if workers > 1:
        with ProcessPoolExecutor(workers) as executor:
            return list(executor.map(_predict_one, jobs, chunksize=8))
    return [_predict_one(job) for job in jobs]


def train_image_classifier(samples, settings):
    """Logistic baseline over the image features."""
    features = np.array([featurize_image(s.image) for s in samples])
    labels = np.array([s.image_label.index for s in samples])
    logistic = settings.logistic
    return train_logistic(
        features,
        labels,
        epochs=logistic.epochs,
        rate=logistic.rate,
        seed=settings.ssvm.seed,
        batch_size=logistic.batch_size,
    )


def predict_images(model, samples):
    """Image labels only; pixel labels are left as background."""
    predictions = []
    for s in samples:
        label, _ = predict_logistic(model, featurize_image(s.image))
        image_label = ImageLabel.SNAKE if label == 0 else ImageLabel.NO_SNAKE
        predictions.append(_as_prediction(s, np.zeros(s.image.labels.size, np.int64), image_label))
    return predictions


# ------------------------- series --------------------------------------------


def _datasets(seed):
    """Snake train/test and Hidden Snake train/test seeds of one series."""
    return np.random.SeedSequence(seed).spawn(4)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def _run(report, body):
    try:
        body()
    except TypedCrfError as exc:
        report.failure = f"{type(exc).__name__}: {exc}"
        raise ExperimentError(report.failure, report) from exc
    return report


def _crf_rows(report, dataset, kinds, train, test, settings):
    for kind, method, constrained_too in kinds:
        with _Timer() as timer:
            weights = train_single(train, settings) if kind == "single" else train_multi(
                train, settings
            )
        logger.info("%s / %s: trained in %.1fs", dataset, method, timer.seconds)
        variants = [(method, False)]
        if constrained_too:
            variants.append((MULTI_LOGIC, True))
        for name, constrained in variants:
            with _Timer() as timer:
                pred = predict_samples(
                    kind, weights, test, settings, constrained, settings.workers
                )
            logger.info("%s / %s: predicted in %.1fs", dataset, name, timer.seconds)
            row = score_row(
                dataset, name, pred, test, images=kind == "multi", seconds=timer.seconds
            )
            report.rows.append(row)
            report.predictions[f"{dataset}-{name}"] = pred


def _oracle_row(report, dataset, test):
    pred = predict_background(test)
    report.rows.append(score_row(dataset, ORACLE, pred, test, images=False))
    report.predictions[f"{dataset}-{ORACLE}"] = pred
    report.gold[dataset] = test


def _parallel_training(settings):
    return replace(settings, ssvm=replace(settings.ssvm, workers=settings.workers))


def run_experiment_snake(seed, settings=None):
    """Single-type CRF on Snake, then on Hidden Snake, with oracle rows."""
    settings = _parallel_training((settings or ExperimentSettings()).with_seed(seed))
    report = ExperimentReport("snake", seed)
    snake_train, snake_test, hidden_train, hidden_test = _datasets(seed)

    def body():
        for dataset, builder, train_seed, test_seed in (
            ("snake", build_snake_dataset, snake_train, snake_test),
            ("hidden", build_hidden_dataset, hidden_train, hidden_test),
        ):
            train = builder(settings.train_snakes, train_seed)
            test = builder(settings.test_snakes, test_seed)
            _oracle_row(report, dataset, test)
            _crf_rows(report, dataset, [("single", SINGLE, False)], train, test, settings)

    return _run(report, body)


def run_experiment_hidden(seed, settings=None):
    """Oracle, single-type CRF, logistic baseline and the multi-type CRF with
    and without constraints, all on Hidden Snake."""
    settings = _parallel_training((settings or ExperimentSettings()).with_seed(seed))
    report = ExperimentReport("hidden", seed)
    _, _, train_seed, test_seed = _datasets(seed)

    def body():
        train = build_hidden_dataset(settings.train_snakes, train_seed)
        test = build_hidden_dataset(settings.test_snakes, test_seed)
        _oracle_row(report, "hidden", test)
        _crf_rows(report, "hidden", [("single", SINGLE, False)], train, test, settings)
        with _Timer() as timer:
            model = train_image_classifier(train, settings)
            pred = predict_images(model, test)
        report.rows.append(
            score_row("hidden", LOGIT, pred, test, pixels=False, seconds=timer.seconds)
        )
        report.predictions[f"hidden-{LOGIT}"] = pred
        _crf_rows(report, "hidden", [("multi", MULTI, True)], train, test, settings)

    return _run(report, body)


def _scaling_run(job):
    size, run_seed, test, settings = job
    train = build_hidden_dataset(size, run_seed)
    single = train_single(train, settings)
    multi = train_multi(train, settings)
    scores = {}
    for name, kind, weights, constrained in (
        (SINGLE, "single", single, False),
        (MULTI, "multi", multi, False),
        (MULTI_LOGIC, "multi", multi, True),
    ):
        pred = predict_samples(kind, weights, test, settings, constrained)
        scores[name] = metric_pixel_accuracy(pred, test)
    return scores


def _welch(a, b):
    if len(a) < 2 or len(b) < 2:
        return None
    p = float(ttest_ind(a, b, equal_var=False).pvalue)
    return None if math.isnan(p) else p


def run_experiment_scaling(seed, settings=None, sizes=None, runs=None):
    """Mean and deviation of pixel accuracy against the training-set size.

    Every (size, run) pair gets a fresh Hidden Snake training set built from
    ``size`` snakes; the test set is shared. Runs execute in
    ``settings.workers`` processes.
    """
    settings = (settings or ExperimentSettings()).with_seed(seed)
    sizes = tuple(sizes or settings.scaling_sizes)
    runs = runs or settings.scaling_runs
    report = ExperimentReport("scaling", seed)
    _, snake_test, _, hidden_test = _datasets(seed)

    def body():
        if settings.snake_only_test:
            dataset, test = "snake", build_snake_dataset(settings.test_snakes, snake_test)
        else:
            dataset, test = "hidden", build_hidden_dataset(settings.test_snakes, hidden_test)
        report.gold[dataset] = test
        pixels = sum(s.image.labels.size for s in test)
        snake_cells = sum(int(np.count_nonzero(s.image.labels)) for s in test)
        compare = {MULTI: SINGLE, MULTI_LOGIC: MULTI}
        with ExitStack() as stack:
            executor = None
            if settings.workers > 1:
                executor = stack.enter_context(ProcessPoolExecutor(settings.workers))
            for size in sizes:
                jobs = []
                for run in range(runs):
                    run_seed = np.random.SeedSequence([seed, size, run])
                    report.seeds.append(int(run_seed.generate_state(1)[0]))
                    jobs.append((size, run_seed, test, settings))
                with _Timer() as timer:
                    if executor is not None:
                        results = list(executor.map(_scaling_run, jobs))
                    else:
                        results = [_scaling_run(job) for job in jobs]
                logger.info("scaling: size %d, %d runs in %.1fs", size, runs, timer.seconds)

                # rows of finished sizes survive a failure in a later one
                per_method = {
                    name: [r[name] for r in results] for name in (SINGLE, MULTI, MULTI_LOGIC)
                }
                for name, values in per_method.items():
                    against = compare.get(name)
                    report.rows.append(
                        ReportRow(
                            dataset=dataset,
                            method=name,
                            pixels=pixels,
                            pixel_accuracy=float(np.mean(values)),
                            snake_cells=snake_cells,
                            snake_cell_accuracy=None,
                            images=len(test),
                            image_accuracy=None,
                            train_size=size,
                            runs=len(values),
                            pixel_accuracy_std=(
                                float(np.std(values, ddof=1)) if len(values) > 1 else None
                            ),
                            welch_p=_welch(values, per_method[against]) if against else None,
                            compared_to=against,
                        )
                    )

    return _run(report, body)


EXPERIMENTS = {
    "snake": run_experiment_snake,
    "hidden": run_experiment_hidden,
    "scaling": run_experiment_scaling,
}
