"""Structured SVM training and the logistic image baseline."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .crf_model import (
    Weights,
    joint_feature,
    loss_augmented_predict,
    potential,
)
from .errors import DegenerateDataError, DimensionError, InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SsvmSettings:
    """Hyper-parameters of :func:`train_ssvm`.

    ``C = 0`` is accepted and yields the all-zero model.
    """

    C: float = 1.0
    epochs: int = 30
    step_size: float = 0.1
    averaging: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.C < 0:
            raise InvalidArgumentError(f"C must be non-negative, got {self.C}")
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.step_size <= 0:
            raise InvalidArgumentError(f"step_size must be positive, got {self.step_size}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")


def hamming(y, other):
    """Number of nodes, over all types, whose labels differ."""
    if y.shape != other.shape:
        raise DimensionError(f"labelings differ in shape: {y.shape} != {other.shape}")
    return int(sum(np.count_nonzero(a != b) for a, b in zip(y, other)))


def _check_data(data, schema):
    if not data:
        raise InvalidArgumentError("training data is empty")
    for g, _ in data:
        if g.schema != schema:
            raise DimensionError("every training instance must use the model schema")


def _loss_augmented_job(job):
    g, weights, gold, inference = job
    return loss_augmented_predict(g, weights, gold, inference)


def ssvm_objective(data, weights, C, inference=None):
    """``0.5 |w|^2 + C * sum of margin-rescaled hinge losses``."""
    w = weights.flatten()
    total = 0.0
    for g, gold in data:
        worst = loss_augmented_predict(g, weights, gold, inference)
        hinge = potential(g, worst, weights) + hamming(worst, gold) - potential(g, gold, weights)
        total += max(hinge, 0.0)
    return 0.5 * float(w @ w) + C * total


def train_ssvm(data, schema, settings=None, inference=None, on_epoch_end=None):
    """Averaged stochastic subgradient descent on the structured hinge.

    Each step visits one sample ``(x, gold)``, finds the loss-augmented
    labeling ``y_hat`` and moves the weights by
    ``-rate * (w / N + C * (phi(x, y_hat) - phi(x, gold)))`` where the rate
    decays as ``step_size / (1 + epoch)``. With ``workers > 1`` the
    loss-augmented labelings of an epoch are computed in parallel against the
    weights at the start of the epoch, then applied in sample order.

    ``on_epoch_end(epoch, weights)`` receives the weights that would be
    returned if training stopped there.
    """
    settings = settings or SsvmSettings()
    data = list(data)
    _check_data(data, schema)
    size = schema.weight_size
    if settings.C == 0:
        return Weights.zeros(schema)

    n = len(data)
    golds = [joint_feature(g, gold) for g, gold in data]
    rng = np.random.default_rng(settings.seed)
    w = np.zeros(size)
    average = np.zeros(size)
    steps = 0

    executor = ProcessPoolExecutor(settings.workers) if settings.workers > 1 else None
    try:
        for epoch in range(settings.epochs):
            rate = settings.step_size / (1.0 + epoch)
            order = rng.permutation(n)
            if executor is not None:
                snapshot = Weights.unflatten(schema, w)
                jobs = [(data[i][0], snapshot, data[i][1], inference) for i in order]
                worst = list(executor.map(_loss_augmented_job, jobs))
            loss = 0
            for position, i in enumerate(order):
                g, gold = data[i]
                if executor is not None:
                    y_hat = worst[position]
                else:
                    y_hat = loss_augmented_predict(
                        g, Weights.unflatten(schema, w), gold, inference
                    )
                loss += hamming(y_hat, gold)
                w -= rate * (w / n + settings.C * (joint_feature(g, y_hat) - golds[i]))
                steps += 1
                average += (w - average) / steps
            current = Weights.unflatten(schema, average if settings.averaging else w)
            logger.info(
                "epoch %d/%d: loss-augmented hamming %d, |w| %.4g",
                epoch + 1,
                settings.epochs,
                loss,
                np.linalg.norm(current.flatten()),
            )
            if on_epoch_end is not None:
                on_epoch_end(epoch, current)
    finally:
        if executor is not None:
            executor.shutdown()
    return current


# ------------------------- logistic baseline ---------------------------------


@dataclass(frozen=True, eq=False)
class LinearBinaryModel:
    weights: np.ndarray
    bias: float = 0.0

    def probabilities(self, features):
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != len(self.weights):
            raise DimensionError(
                f"expected {len(self.weights)} features, got {features.shape[-1]}"
            )
        return expit(features @ self.weights + self.bias)


def train_logistic(features, labels, epochs=500, rate=0.5, seed=0, batch_size=None):
    """Gradient descent on the mean log-loss.

    Features are standardised while training; the returned model works on the
    raw features. ``batch_size=None`` uses full batches, otherwise the rows
    are reshuffled by ``seed`` every epoch.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if x.ndim != 2 or len(x) != len(y):
        raise DimensionError(f"need one label per feature row: {x.shape} vs {y.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise InvalidArgumentError("labels must be 0 or 1")
    if len(y) < 2 or y.min() == y.max():
        raise DegenerateDataError("logistic regression needs both classes in the data")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        if batch_size:
            order = rng.permutation(len(y))
            batches = [order[i : i + batch_size] for i in range(0, len(y), batch_size)]
        else:
            batches = [slice(None)]
        for rows in batches:
            error = expit(z[rows] @ w + b) - y[rows]
            w = w - rate * (z[rows].T @ error) / len(error)
            b = b - rate * float(error.mean())
    folded = w / scale
    return LinearBinaryModel(folded, float(b - folded @ mean))


def predict_logistic(model, features):
    """``(label, probability)`` with label 1 when the probability is >= 0.5.

    >>> predict_logistic(LinearBinaryModel(np.zeros(3)), [1.0, 2.0, 3.0])
    (1, 0.5)
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 1:
        raise DimensionError("predict_logistic takes one feature vector")
    probability = float(model.probabilities(features))
    return int(probability >= 0.5), probability
