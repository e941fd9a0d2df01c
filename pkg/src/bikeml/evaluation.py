"""Model assessment: K-fold cross-validation for model selection, metric
implementations, and the final hold-out evaluation whose numbers feed the
feature-model attributes.

The protocol has three steps: fit candidate settings on K-1 folds and score
on the held-out fold (averaged over all K choices), pick the best setting,
then retrain it on everything except an external test split that no training
or selection step ever saw. Only that external number is reported as final.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import LengthMismatch, TooFewSamples, UnknownClass

CLASSIFICATION = "classification"
REGRESSION = "regression"

ACCURACY = "overall_accuracy"
MAE = "mae_seconds"


# ---------------------------------------------------------------------------
# Metrics


def mae(predicted: Sequence[float], target: Sequence[float]) -> float:
    """Mean absolute error between two equal-length vectors."""
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape:
        raise LengthMismatch(f"{predicted.shape} vs {target.shape}")
    if predicted.size == 0:
        raise LengthMismatch("cannot average zero samples")
    return float(np.mean(np.abs(predicted - target)))


def class_accuracy(
    predictions: Sequence,
    targets: Sequence,
    class_i,
    *,
    literal_denominator: bool = False,
) -> float:
    """One-vs-rest accuracy for one class: (TP_i + TN_i) / N.

    A class absent from both sequences scores 1.0 (every sample is a true
    negative for it). ``literal_denominator=True`` divides by the number of
    samples whose target is ``class_i`` instead of the total; that variant
    can exceed 1 and exists only for comparison, and raises
    :class:`UnknownClass` when no target sample has the class.
    """
    predictions = list(predictions)
    targets = list(targets)
    if len(predictions) != len(targets):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(targets)} targets")
    if not predictions:
        raise LengthMismatch("cannot score zero samples")
    tp = sum(1 for p, t in zip(predictions, targets) if p == class_i and t == class_i)
    tn = sum(1 for p, t in zip(predictions, targets) if p != class_i and t != class_i)
    if literal_denominator:
        n_i = sum(1 for t in targets if t == class_i)
        if n_i == 0:
            raise UnknownClass(f"no target samples of class {class_i!r}")
        return (tp + tn) / n_i
    return (tp + tn) / len(targets)


def classification_metrics(pred_labels: Sequence, true_labels: Sequence) -> dict:
    """Overall accuracy plus per-class one-vs-rest accuracy for every class
    present in the targets."""
    pred_labels = list(pred_labels)
    true_labels = list(true_labels)
    if len(pred_labels) != len(true_labels):
        raise LengthMismatch("prediction/target length mismatch")
    overall = sum(p == t for p, t in zip(pred_labels, true_labels)) / len(true_labels)
    per_class = {
        label: class_accuracy(pred_labels, true_labels, label)
        for label in sorted(set(true_labels))
    }
    return {ACCURACY: overall, "per_class_accuracy": per_class}


# ---------------------------------------------------------------------------
# Fold plans and splits


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray  # fold index per sample
    seed: int

    def fold(self, fold_index: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold_index)

    def rest(self, fold_index: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold_index)


def kfold_split(
    n_samples: int, k: int, seed: int, stratify_labels: Sequence | None = None
) -> FoldPlan:
    """Seeded shuffle followed by round-robin assignment.

    With ``stratify_labels`` the round-robin runs within each label while a
    running offset keeps overall fold sizes within one of each other.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if n_samples < k:
        raise TooFewSamples(f"{n_samples} samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n_samples, dtype=int)
    if stratify_labels is None:
        order = rng.permutation(n_samples)
        assignments[order] = np.arange(n_samples) % k
    else:
        labels = np.asarray(stratify_labels)
        if labels.shape[0] != n_samples:
            raise LengthMismatch("stratify_labels length must match n_samples")
        offset = 0
        for label in np.unique(labels):
            members = np.flatnonzero(labels == label)
            members = members[rng.permutation(members.size)]
            assignments[members] = (offset + np.arange(members.size)) % k
            offset = (offset + members.size) % k
    return FoldPlan(k, assignments, seed)


def train_test_split(
    n_samples: int,
    test_fraction: float,
    seed: int,
    stratify_labels: Sequence | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(train_indices, test_indices), stratified when labels are given."""
    if not 0.0 < test_fraction <= 0.5:
        raise ValueError("test_fraction must be in (0, 0.5]")
    n_test = round(n_samples * test_fraction)
    if n_test < 1 or n_samples - n_test < 1:
        raise TooFewSamples(
            f"cannot split {n_samples} samples at test fraction {test_fraction}"
        )
    rng = np.random.default_rng(seed)
    if stratify_labels is None:
        order = rng.permutation(n_samples)
        return np.sort(order[n_test:]), np.sort(order[:n_test])
    labels = np.asarray(stratify_labels)
    uniques = np.unique(labels)
    # per-class quotas by largest remainder, so the test size is exact
    quotas = {}
    remainders = []
    assigned = 0
    for label in uniques:
        exact = np.count_nonzero(labels == label) * n_test / n_samples
        quotas[label] = int(math.floor(exact))
        assigned += quotas[label]
        remainders.append((-(exact - math.floor(exact)), label))
    for _, label in sorted(remainders)[: n_test - assigned]:
        quotas[label] += 1
    test_parts = []
    for label in uniques:
        members = np.flatnonzero(labels == label)
        members = members[rng.permutation(members.size)]
        test_parts.append(members[: quotas[label]])
    test_idx = np.sort(np.concatenate(test_parts)).astype(int)
    mask = np.ones(n_samples, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


# ---------------------------------------------------------------------------
# Cross-validation over a hyperparameter grid


@dataclass
class ModelFamily:
    """One learner family bound to its dataset.

    ``fit(indices, setting)`` trains on the given sample indices;
    ``evaluate(model, indices)`` returns a metric dict that must include
    ``overall_accuracy`` (classification) or ``mae_seconds`` (regression).
    """

    name: str
    task: str
    fit: Callable[[np.ndarray, dict], Any]
    evaluate: Callable[[Any, np.ndarray], dict]

    @property
    def selection_metric(self) -> str:
        return ACCURACY if self.task == CLASSIFICATION else MAE

    @property
    def higher_is_better(self) -> bool:
        return self.task == CLASSIFICATION


@dataclass
class SettingResult:
    setting: dict
    fold_metrics: list[dict]
    cv_mean: dict = field(init=False)
    cv_std: dict = field(init=False)

    def __post_init__(self):
        keys = [
            k for k in self.fold_metrics[0] if isinstance(self.fold_metrics[0][k], (int, float))
        ]
        self.cv_mean = {
            k: float(np.mean([m[k] for m in self.fold_metrics])) for k in keys
        }
        self.cv_std = {k: float(np.std([m[k] for m in self.fold_metrics])) for k in keys}


@dataclass
class CvResult:
    k: int
    seed: int
    settings: list[SettingResult]
    best_index: int
    selection_metric: str

    @property
    def best_setting(self) -> dict:
        return self.settings[self.best_index].setting


def cross_validate(
    family: ModelFamily,
    n_samples: int,
    grid: Sequence[dict],
    k: int,
    seed: int,
    stratify_labels: Sequence | None = None,
    sample_indices: np.ndarray | None = None,
) -> CvResult:
    """K-fold evaluation of every grid setting; best by mean selection metric,
    ties broken by grid order.

    ``sample_indices`` restricts the folds to a subset of the dataset (used
    by final_assessment to keep the external test set out).
    """
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    if sample_indices is None:
        sample_indices = np.arange(n_samples)
    sample_indices = np.asarray(sample_indices)
    plan_labels = None
    if stratify_labels is not None:
        plan_labels = np.asarray(stratify_labels)[sample_indices]
    plan = kfold_split(sample_indices.size, k, seed, plan_labels)
    results = []
    for si, setting in enumerate(grid):
        fold_metrics = []
        for fi in range(k):
            train_idx = sample_indices[plan.rest(fi)]
            val_idx = sample_indices[plan.fold(fi)]
            try:
                model = family.fit(train_idx, setting)
                fold_metrics.append(family.evaluate(model, val_idx))
            except Exception as e:
                raise type(e)(f"setting {si} ({setting}), fold {fi}: {e}") from e
        results.append(SettingResult(setting=dict(setting), fold_metrics=fold_metrics))
    metric = family.selection_metric
    values = [r.cv_mean[metric] for r in results]
    best = 0
    for i, v in enumerate(values):
        if (family.higher_is_better and v > values[best]) or (
            not family.higher_is_better and v < values[best]
        ):
            best = i
    return CvResult(k=k, seed=seed, settings=results, best_index=best, selection_metric=metric)


# ---------------------------------------------------------------------------
# Final assessment


@dataclass
class EvaluationReport:
    model_descriptor: str
    task: str
    selected_hyperparameters: dict
    cv: CvResult
    final_test_metrics: dict
    train_indices: list[int]
    test_indices: list[int]
    n_samples: int
    warnings: list[str] = field(default_factory=list)

    @property
    def cv_mean(self) -> dict:
        return self.cv.settings[self.cv.best_index].cv_mean

    @property
    def cv_std(self) -> dict:
        return self.cv.settings[self.cv.best_index].cv_std

    def to_dict(self) -> dict:
        return {
            "model_descriptor": self.model_descriptor,
            "task": self.task,
            "selected_hyperparameters": self.selected_hyperparameters,
            "cv": {
                "k": self.cv.k,
                "seed": self.cv.seed,
                "selection_metric": self.cv.selection_metric,
                "best_index": self.cv.best_index,
                "settings": [
                    {
                        "setting": s.setting,
                        "fold_metrics": s.fold_metrics,
                        "cv_mean": s.cv_mean,
                        "cv_std": s.cv_std,
                    }
                    for s in self.cv.settings
                ],
            },
            "final_test_metrics": self.final_test_metrics,
            "train_indices": [int(i) for i in self.train_indices],
            "test_indices": [int(i) for i in self.test_indices],
            "n_samples": self.n_samples,
            "warnings": self.warnings,
        }


def final_assessment(
    family: ModelFamily,
    n_samples: int,
    grid: Sequence[dict],
    k: int,
    seed: int,
    test_fraction: float = 0.2,
    stratify_labels: Sequence | None = None,
) -> tuple[EvaluationReport, Any]:
    """Run the full three-step protocol and return (report, final model).

    The external test split is carved out first and touches no training or
    selection step; the report keeps both index sets so that disjointness
    stays checkable.
    """
    split_labels = stratify_labels if family.task == CLASSIFICATION else None
    train_idx, test_idx = train_test_split(n_samples, test_fraction, seed, split_labels)
    if train_idx.size < k:
        raise TooFewSamples(
            f"{train_idx.size} training samples cannot fill {k} folds"
        )
    cv = cross_validate(
        family,
        n_samples,
        grid,
        k,
        seed,
        stratify_labels=split_labels,
        sample_indices=train_idx,
    )
    final_model = family.fit(train_idx, cv.best_setting)
    final_metrics = family.evaluate(final_model, test_idx)
    report = EvaluationReport(
        model_descriptor=family.name,
        task=family.task,
        selected_hyperparameters=cv.best_setting,
        cv=cv,
        final_test_metrics=final_metrics,
        train_indices=[int(i) for i in train_idx],
        test_indices=[int(i) for i in test_idx],
        n_samples=n_samples,
    )
    return report, final_model
