import collections
import itertools
import math

import numpy as np
import pytest

from bikeml.errors import LengthMismatch, TooFewSamples, UnknownClass
from bikeml.evaluation import (
    CLASSIFICATION,
    REGRESSION,
    EvaluationReport,
    ModelFamily,
    class_accuracy,
    classification_metrics,
    cross_validate,
    final_assessment,
    kfold_split,
    mae,
    train_test_split,
)

# ---------------------------------------------------------------------------
# Oracles


def confusion_matrix_accuracy(preds, targets, cls):
    """Brute-force one-vs-rest accuracy via an explicit 2x2 confusion matrix."""
    tp = fp = tn = fn = 0
    for p, t in zip(preds, targets):
        if t == cls and p == cls:
            tp += 1
        elif t != cls and p == cls:
            fp += 1
        elif t != cls and p != cls:
            tn += 1
        else:
            fn += 1
    return (tp + tn) / (tp + fp + tn + fn)


def mae_oracle(pred, target):
    """Re-summation in a different order with exact accumulation."""
    return math.fsum(sorted(abs(p - t) for p, t in zip(pred, target))) / len(pred)


# ---------------------------------------------------------------------------


class TestMae:
    def test_hand_example(self):
        assert mae([3, 5], [4, 5]) == 0.5

    def test_identity_is_zero(self):
        x = np.linspace(0, 9, 17)
        assert mae(x, x) == 0.0

    def test_matches_resummation_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            pred = rng.normal(0, 100, 100)
            target = rng.normal(0, 100, 100)
            assert abs(mae(pred, target) - mae_oracle(pred, target)) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mae([1, 2], [1])

    def test_empty(self):
        with pytest.raises(LengthMismatch):
            mae([], [])


class TestClassAccuracy:
    def test_perfect_predictor(self):
        labels = ["a", "b"] * 5
        for cls in ("a", "b"):
            assert class_accuracy(labels, labels, cls) == 1.0

    def test_hand_count(self):
        targets = ["A", "A", "B", "B"]
        preds = ["A", "B", "B", "B"]
        assert class_accuracy(preds, targets, "A") == 0.75

    def test_exhaustive_two_class_matches_confusion_oracle(self):
        # all 64 prediction/target assignments over 3 samples, 2 classes
        for preds in itertools.product("ab", repeat=3):
            for targets in itertools.product("ab", repeat=3):
                for cls in "ab":
                    assert class_accuracy(preds, targets, cls) == confusion_matrix_accuracy(
                        preds, targets, cls
                    )

    def test_literal_denominator_variant(self):
        targets = ["A", "A", "B", "B"]
        preds = ["A", "B", "B", "B"]
        # TP_A + TN_A = 1 + 2 = 3, N_A = 2
        assert class_accuracy(preds, targets, "A", literal_denominator=True) == 1.5

    def test_absent_class_is_all_true_negatives(self):
        assert class_accuracy(["a", "a"], ["a", "b"], "z") == 1.0

    def test_unknown_class_in_literal_mode(self):
        with pytest.raises(UnknownClass):
            class_accuracy(["a"], ["a"], "z", literal_denominator=True)


class TestKfoldSplit:
    def test_exactness_over_grid(self):
        for k in range(2, 11):
            for n in range(k, 51):
                plan = kfold_split(n, k, seed=n * 31 + k)
                folds = [plan.fold(i) for i in range(k)]
                sizes = [f.size for f in folds]
                assert min(sizes) >= 1
                assert max(sizes) - min(sizes) <= 1
                union = np.concatenate(folds)
                assert sorted(union.tolist()) == list(range(n))

    def test_ten_by_five(self):
        plan = kfold_split(10, 5, seed=0)
        assert [plan.fold(i).size for i in range(5)] == [2] * 5

    def test_ten_by_three_remainder(self):
        plan = kfold_split(10, 3, seed=0)
        assert sorted(plan.fold(i).size for i in range(3)) == [3, 3, 4]

    def test_stratified_divisible_case(self):
        labels = ["a"] * 6 + ["b"] * 6
        plan = kfold_split(12, 3, seed=1, stratify_labels=labels)
        for i in range(3):
            members = plan.fold(i)
            counts = collections.Counter(labels[j] for j in members)
            assert counts == {"a": 2, "b": 2}

    def test_stratified_proportions_within_one(self):
        rng = np.random.default_rng(4)
        for trial in range(20):
            n = int(rng.integers(10, 60))
            k = int(rng.integers(2, 6))
            labels = rng.choice(["x", "y", "z"], n)
            plan = kfold_split(n, k, seed=trial, stratify_labels=labels)
            sizes = [plan.fold(i).size for i in range(k)]
            assert max(sizes) - min(sizes) <= 1
            for label in "xyz":
                per_fold = [
                    sum(1 for j in plan.fold(i) if labels[j] == label) for i in range(k)
                ]
                assert max(per_fold) - min(per_fold) <= 1

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            kfold_split(3, 4, seed=0)

    def test_deterministic(self):
        a = kfold_split(20, 4, seed=9)
        b = kfold_split(20, 4, seed=9)
        assert np.array_equal(a.assignments, b.assignments)


class TestTrainTestSplit:
    def test_exact_sizes_and_disjoint(self):
        train, test = train_test_split(100, 0.2, seed=3)
        assert test.size == 20 and train.size == 80
        assert not set(train) & set(test)
        assert sorted(np.concatenate([train, test]).tolist()) == list(range(100))

    def test_stratified_split_is_proportional(self):
        labels = ["a"] * 40 + ["b"] * 60
        train, test = train_test_split(100, 0.25, seed=5, stratify_labels=labels)
        counts = collections.Counter(labels[i] for i in test)
        assert counts == {"a": 10, "b": 15}

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            train_test_split(10, 0.6, seed=0)


# ---------------------------------------------------------------------------
# Cross-validation with a toy nearest-mean family


def nearest_mean_family(x, y, labels):
    def fit(indices, setting):
        shrink = setting.get("shrink", 0.0)
        means = {}
        for c, label in enumerate(labels):
            members = x[indices][y[indices] == c]
            means[c] = members.mean(axis=0) * (1 - shrink) if members.size else None
        return means

    def evaluate(model, indices):
        preds = []
        for i in indices:
            dists = {
                c: np.linalg.norm(x[i] - m) for c, m in model.items() if m is not None
            }
            preds.append(labels[min(dists, key=lambda c: (dists[c], c))])
        return classification_metrics(preds, [labels[c] for c in y[indices]])

    return ModelFamily("nearest-mean", CLASSIFICATION, fit, evaluate)


def make_blobs(seed=0, n_per=30, spread=0.4):
    rng = np.random.default_rng(seed)
    x = np.vstack(
        [
            rng.normal([0, 0], spread, (n_per, 2)),
            rng.normal([3, 0], spread, (n_per, 2)),
            rng.normal([0, 3], spread, (n_per, 2)),
        ]
    )
    y = np.repeat([0, 1, 2], n_per)
    return x, y, ["a", "b", "c"]


class TestCrossValidate:
    def test_single_setting_is_best(self):
        x, y, labels = make_blobs()
        family = nearest_mean_family(x, y, labels)
        cv = cross_validate(family, len(x), [{"shrink": 0.0}], 5, seed=0, stratify_labels=y)
        assert cv.best_index == 0
        assert cv.best_setting == {"shrink": 0.0}

    def test_cv_mean_equals_hand_average(self):
        x, y, labels = make_blobs(seed=2)
        family = nearest_mean_family(x, y, labels)
        cv = cross_validate(family, len(x), [{"shrink": 0.0}, {"shrink": 0.9}], 4, seed=1)
        for setting in cv.settings:
            per_fold = [m["overall_accuracy"] for m in setting.fold_metrics]
            assert abs(setting.cv_mean["overall_accuracy"] - np.mean(per_fold)) < 1e-15
            assert abs(setting.cv_std["overall_accuracy"] - np.std(per_fold)) < 1e-15

    def test_shuffled_labels_score_at_chance(self):
        rng = np.random.default_rng(0)
        x, y, labels = make_blobs(seed=0, n_per=200)
        y = y.copy()
        rng.shuffle(y)  # destroy the signal
        family = nearest_mean_family(x, y, labels)
        cv = cross_validate(family, len(x), [{"shrink": 0.0}], 5, seed=0)
        acc = cv.settings[0].cv_mean["overall_accuracy"]
        n = len(x)
        sigma = math.sqrt((1 / 3) * (2 / 3) / n)
        assert abs(acc - 1 / 3) < 3 * sigma

    def test_cv_std_zero_when_folds_identical(self):
        x = np.array([[0.0], [0.0], [1.0], [1.0], [0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1, 0, 0, 1, 1])
        family = nearest_mean_family(x, y, ["a", "b"])
        cv = cross_validate(
            family, 8, [{"shrink": 0.0}], 2, seed=0, stratify_labels=y
        )
        assert cv.settings[0].cv_std["overall_accuracy"] == 0.0

    def test_errors_annotated_with_fold_and_setting(self):
        def fit(indices, setting):
            raise TooFewSamples("boom")

        family = ModelFamily("broken", CLASSIFICATION, fit, lambda m, i: {})
        with pytest.raises(TooFewSamples) as exc:
            cross_validate(family, 10, [{"x": 1}], 2, seed=0)
        assert "fold 0" in str(exc.value) and "setting 0" in str(exc.value)

    def test_empty_grid_rejected(self):
        x, y, labels = make_blobs()
        with pytest.raises(ValueError):
            cross_validate(nearest_mean_family(x, y, labels), len(x), [], 5, seed=0)


class TestFinalAssessment:
    def test_indices_disjoint_and_complete(self):
        x, y, labels = make_blobs(seed=3)
        family = nearest_mean_family(x, y, labels)
        report, model = final_assessment(
            family, len(x), [{"shrink": 0.0}], 5, seed=0, stratify_labels=y
        )
        assert not set(report.test_indices) & set(report.train_indices)
        assert len(report.test_indices) == round(0.2 * len(x))
        assert sorted(report.test_indices + report.train_indices) == list(range(len(x)))

    def test_separable_data_perfect_final_accuracy(self):
        x, y, labels = make_blobs(seed=4, spread=0.1)
        family = nearest_mean_family(x, y, labels)
        report, _ = final_assessment(
            family, len(x), [{"shrink": 0.0}], 5, seed=1, stratify_labels=y
        )
        assert report.final_test_metrics["overall_accuracy"] == 1.0
        for acc in report.final_test_metrics["per_class_accuracy"].values():
            assert acc == 1.0

    def test_report_is_deterministic(self):
        x, y, labels = make_blobs(seed=5)
        family = nearest_mean_family(x, y, labels)
        r1, _ = final_assessment(family, len(x), [{"shrink": 0.0}], 4, seed=7)
        r2, _ = final_assessment(family, len(x), [{"shrink": 0.0}], 4, seed=7)
        assert r1.to_dict() == r2.to_dict()

    def test_report_dict_shape(self):
        x, y, labels = make_blobs(seed=6)
        family = nearest_mean_family(x, y, labels)
        report, _ = final_assessment(
            family, len(x), [{"shrink": 0.0}, {"shrink": 0.5}], 3, seed=2
        )
        doc = report.to_dict()
        assert doc["cv"]["best_index"] in (0, 1)
        assert len(doc["cv"]["settings"]) == 2
        assert all(len(s["fold_metrics"]) == 3 for s in doc["cv"]["settings"])
        assert report.cv_mean["overall_accuracy"] <= 1.0
        assert report.cv_std["overall_accuracy"] >= 0.0
