"""Evaluation battery: ML efficiency, privacy distances, correlations, histograms.

Learners are trained on synthetic rows and scored on the real test split.
All three are built on the numpy layers in ``tabsynth.services.nn``.
"""

import logging
from typing import Protocol

import numpy as np
from scipy.linalg import solve

from tabsynth.errors import DataError, UndefinedScoreError
from tabsynth.models import ColumnKind, LearnerKind, Split, TaskKind
from tabsynth.schemas import EvalOptions, EvalReport, HistogramData
from tabsynth.services.gaussian import mse_loss_grad
from tabsynth.services.metrics import (
    binned,
    closest_distances,
    corr_diff,
    f1_score,
    histogram_export,
    r2_score,
)
from tabsynth.services.nn import Adam, Dense, GradientDescent, ReLU, Sequential, backward, softmax_groups
from tabsynth.services.preprocess import TabularDataset, TabularEncoder

log = logging.getLogger("tabsynth")

LOGISTIC_ITERATIONS = 500
LOGISTIC_LR = 0.1
RIDGE_ALPHA = 1.0
MLP_HIDDEN = 100
MLP_LR = 1e-3
MLP_BATCH = 200
MLP_EPOCHS = 100

DEFAULT_LEARNERS = {
    TaskKind.BINCLASS: [LearnerKind.LOGISTIC, LearnerKind.MLP],
    TaskKind.MULTICLASS: [LearnerKind.LOGISTIC, LearnerKind.MLP],
    TaskKind.REGRESSION: [LearnerKind.RIDGE, LearnerKind.MLP],
}


class Learner(Protocol):
    def fit(self, x: np.ndarray, y: np.ndarray) -> "Learner": ...

    def predict(self, x: np.ndarray) -> np.ndarray: ...


class _Standardizer:
    def __init__(self, x: np.ndarray):
        self.mean = x.mean(axis=0)
        std = x.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def _onehot(y: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


def _cross_entropy_grad(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    probs = softmax_groups(logits, [slice(0, logits.shape[1])])
    return (probs - targets) / logits.shape[0]


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------

class LogisticLearner:
    """Softmax regression fitted by full-batch gradient descent."""

    def __init__(self, num_classes: int, rng: np.random.Generator):
        self.num_classes = num_classes
        self.rng = rng

    def fit(self, x: np.ndarray, y: np.ndarray) -> "LogisticLearner":
        self.scale = _Standardizer(x)
        xs = self.scale(x)
        self.layer = Dense(xs.shape[1], self.num_classes, self.rng, np.float64)
        optimizer = GradientDescent(lr=LOGISTIC_LR)
        targets = _onehot(y, self.num_classes)
        for _ in range(LOGISTIC_ITERATIONS):
            grads = backward(self.layer, _cross_entropy_grad(self.layer.forward(xs), targets))
            optimizer.step(self.layer.parameters(), grads)
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.layer.forward(self.scale(x)), axis=1)


class RidgeLearner:
    """Closed-form ridge regression with an unpenalized intercept."""

    def __init__(self, alpha: float = RIDGE_ALPHA):
        self.alpha = alpha

    def fit(self, x: np.ndarray, y: np.ndarray) -> "RidgeLearner":
        self.scale = _Standardizer(x)
        xs = self.scale(x)
        y = y.astype(np.float64)
        x_mean, y_mean = xs.mean(axis=0), y.mean()
        xc = xs - x_mean
        gram = xc.T @ xc + self.alpha * np.eye(xs.shape[1])
        self.coef = solve(gram, xc.T @ (y - y_mean), assume_a="pos")
        self.intercept = y_mean - x_mean @ self.coef
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.scale(x) @ self.coef + self.intercept


class MLPLearner:
    """One hidden ReLU layer trained with Adam on shuffled minibatches."""

    def __init__(self, num_classes: int, rng: np.random.Generator):
        # num_classes == 0 selects regression
        self.num_classes = num_classes
        self.rng = rng

    def fit(self, x: np.ndarray, y: np.ndarray) -> "MLPLearner":
        self.scale = _Standardizer(x)
        xs = self.scale(x)
        out_dim = self.num_classes or 1
        self.net = Sequential([
            Dense(xs.shape[1], MLP_HIDDEN, self.rng, np.float64),
            ReLU(),
            Dense(MLP_HIDDEN, out_dim, self.rng, np.float64),
        ])
        if self.num_classes:
            targets = _onehot(y, self.num_classes)
        else:
            y = y.astype(np.float64)
            self.y_mean, self.y_std = y.mean(), y.std() or 1.0
            targets = ((y - self.y_mean) / self.y_std)[:, None]

        optimizer = Adam(lr=MLP_LR)
        n = len(xs)
        for _ in range(MLP_EPOCHS):
            order = self.rng.permutation(n)
            for start in range(0, n, MLP_BATCH):
                idx = order[start:start + MLP_BATCH]
                out = self.net.forward(xs[idx])
                if self.num_classes:
                    grad = _cross_entropy_grad(out, targets[idx])
                else:
                    grad = mse_loss_grad(targets[idx], out)
                optimizer.step(self.net.parameters(), backward(self.net, grad))
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = self.net.forward(self.scale(x))
        if self.num_classes:
            return np.argmax(out, axis=1)
        return out[:, 0] * self.y_std + self.y_mean


def make_learner(kind: LearnerKind, task: TaskKind, num_classes: int, seed: int) -> Learner:
    rng = np.random.default_rng(seed)
    if kind is LearnerKind.MLP:
        return MLPLearner(num_classes if task.is_classification else 0, rng)
    if kind is LearnerKind.LOGISTIC:
        if not task.is_classification:
            raise ValueError("logistic-regression needs a classification task")
        return LogisticLearner(num_classes, rng)
    if task.is_classification:
        raise ValueError("ridge-regression needs a regression task")
    return RidgeLearner()


# ---------------------------------------------------------------------------
# ML efficiency
# ---------------------------------------------------------------------------

def ml_efficiency(
    synthetic: TabularDataset,
    test: TabularDataset,
    learner: LearnerKind,
    encoder: TabularEncoder | None = None,
    seed: int = 0,
) -> float:
    """Train *learner* on *synthetic*, score it on *test* (macro F1 or R2)."""
    if encoder is None:
        encoder = TabularEncoder().fit(synthetic)
    encoder.check_schema(synthetic)
    encoder.check_schema(test)
    if len(synthetic) == 0 or len(test) == 0:
        raise DataError("ML efficiency needs non-empty training and test sets")
    task = encoder.task
    if task.is_classification and np.unique(synthetic.target).size < 2:
        raise UndefinedScoreError("the synthetic training set holds a single class")

    model = make_learner(learner, task, encoder.num_classes, seed)
    model.fit(encoder.learner_features(synthetic), synthetic.target)
    pred = model.predict(encoder.learner_features(test))
    if task.is_classification:
        return f1_score(test.target.astype(np.int64), pred)
    return r2_score(test.target, pred)


# ---------------------------------------------------------------------------
# Full report
# ---------------------------------------------------------------------------

def _distance_histogram(synthetic: np.ndarray, holdout: np.ndarray, bins: int) -> HistogramData:
    top = max(float(synthetic.max()), float(holdout.max()) if holdout.size else 0.0)
    edges = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
    return HistogramData(
        kind=ColumnKind.NUMERICAL,
        edges=edges.tolist(),
        real=binned(holdout, edges) if holdout.size else [0] * bins,
        synthetic=binned(synthetic, edges),
    )


def evaluate(
    real: TabularDataset,
    synthetic: TabularDataset,
    options: EvalOptions | None = None,
    threads: int = 1,
) -> EvalReport:
    """Score *synthetic* against the train and test splits of *real*.

    Learner scores are averaged over ``options.seeds`` training seeds. The
    distance histogram's ``real`` series holds the test rows' distances to
    the training rows, as a reference for what unseen real data looks like.
    """
    options = options or EvalOptions()
    encoder = TabularEncoder().fit(real)
    encoder.check_schema(synthetic)
    train = real.split_view(Split.TRAIN)
    test = real.split_view(Split.TEST)
    if len(test) == 0:
        raise DataError("the real dataset has no test rows")
    if len(synthetic) == 0:
        raise DataError("the synthetic dataset is empty")

    learners = options.learners or DEFAULT_LEARNERS[real.task]
    efficiency, efficiency_std = {}, {}
    for kind in learners:
        scores = [ml_efficiency(synthetic, test, kind, encoder, seed) for seed in range(options.seeds)]
        efficiency[kind.value] = float(np.mean(scores))
        efficiency_std[kind.value] = float(np.std(scores))
        log.info("%s: %.4f ± %.4f over %d seed(s)", kind.value, efficiency[kind.value],
                 efficiency_std[kind.value], options.seeds)

    real_space = encoder.privacy_space(train)
    distances = closest_distances(real_space, encoder.privacy_space(synthetic), threads)
    holdout = closest_distances(real_space, encoder.privacy_space(test), threads)
    median = float(np.median(distances))
    log.info("DCR median %.4f (%d synthetic rows vs %d training rows)", median, len(synthetic), len(train))

    return EvalReport(
        task=real.task,
        seeds=options.seeds,
        efficiency=efficiency,
        efficiency_std=efficiency_std,
        dcr=median,
        dcr_p05=float(np.percentile(distances, 5)),
        dcr_p95=float(np.percentile(distances, 95)),
        exact_copy_rate=float(np.mean(distances == 0.0)),
        dcr_histogram=_distance_histogram(distances, holdout, options.histogram_bins),
        corr_diff=corr_diff(train, synthetic),
        histograms=histogram_export(train, synthetic, options.histogram_bins),
    )
