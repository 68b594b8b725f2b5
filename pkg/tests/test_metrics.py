import numpy as np
import pytest

from comclust.autodiff import make_rng
from comclust.errors import EmptyInputError, SingleClassError
from comclust.metrics import confusion, roc_auc, weighted_metrics


def pairwise_auc(labels, scores):
    """O(n^2) oracle: concordant pairs count 1, ties 0.5."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, float)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


def per_class_oracle(labels, predictions):
    """Direct support-weighted computation, independent of the library."""
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    n = len(labels)
    out = dict.fromkeys(("recall", "precision", "specificity", "f1"), 0.0)
    for cls in (0, 1):
        support = np.sum(labels == cls)
        if support == 0:
            continue
        tp = np.sum((labels == cls) & (predictions == cls))
        fp = np.sum((labels != cls) & (predictions == cls))
        tn = np.sum((labels != cls) & (predictions != cls))
        fn = support - tp
        rec = tp / (tp + fn) if tp + fn else 0.0
        prec = tp / (tp + fp) if tp + fp else 0.0
        spec = tn / (tn + fp) if tn + fp else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        for key, val in (("recall", rec), ("precision", prec),
                         ("specificity", spec), ("f1", f1)):
            out[key] += (support / n) * val
    out["accuracy"] = np.mean(labels == predictions)
    return out


class TestWeightedMetrics:
    def test_perfect_predictions(self):
        got = weighted_metrics([0, 1, 0, 1], [0, 1, 0, 1])
        assert all(got[k] == pytest.approx(1.0) for k in got)

    def test_hand_case_98(self):
        # N=100, 2 minority; TP=1, FN=1, FP=1, TN=97
        labels = np.array([1] * 2 + [0] * 98)
        preds = np.array([1, 0] + [1] + [0] * 97)
        got = weighted_metrics(labels, preds)
        assert got["recall"] == pytest.approx(0.98, abs=1e-12)
        assert got["accuracy"] == pytest.approx(0.98, abs=1e-12)

    def test_all_majority_predictions(self):
        labels = np.array([1] * 5 + [0] * 95)
        preds = np.zeros(100, dtype=int)
        got = weighted_metrics(labels, preds)
        assert got["recall"] == pytest.approx(0.95, abs=1e-12)
        assert got["accuracy"] == pytest.approx(0.95, abs=1e-12)
        # minority-class components are zero, so precision < 1
        assert got["precision"] == pytest.approx(0.95 * 0.95, abs=1e-12)

    def test_weighted_recall_equals_accuracy_identity(self):
        rng = make_rng(1)
        for _ in range(300):
            n = int(rng.integers(1, 60))
            labels = rng.integers(0, 2, size=n)
            preds = rng.integers(0, 2, size=n)
            got = weighted_metrics(labels, preds)
            assert got["recall"] == pytest.approx(got["accuracy"], abs=1e-12)

    def test_matches_per_class_oracle(self):
        rng = make_rng(2)
        for _ in range(100):
            n = int(rng.integers(2, 80))
            labels = rng.integers(0, 2, size=n)
            preds = rng.integers(0, 2, size=n)
            got = weighted_metrics(labels, preds)
            oracle = per_class_oracle(labels, preds)
            for key in oracle:
                assert got[key] == pytest.approx(oracle[key], abs=1e-12)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            weighted_metrics([], [])


class TestConfusion:
    def test_counts(self):
        c = confusion([1, 1, 0, 0, 0], [1, 0, 1, 0, 0])
        assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 2)
        assert c.total == 5


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == pytest.approx(1.0)

    def test_all_ties(self):
        assert roc_auc([0, 1, 0, 1], [0.5] * 4) == pytest.approx(0.5)

    def test_hand_case(self):
        assert roc_auc([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]) == pytest.approx(0.75)

    def test_single_class(self):
        with pytest.raises(SingleClassError):
            roc_auc([1, 1], [0.1, 0.2])

    def test_matches_pairwise_oracle_with_ties(self):
        rng = make_rng(3)
        for _ in range(100):
            n = int(rng.integers(4, 60))
            labels = rng.integers(0, 2, size=n)
            if len(np.unique(labels)) < 2:
                continue
            # coarse grid forces plenty of ties
            scores = rng.integers(0, 5, size=n) / 4.0
            assert roc_auc(labels, scores) == pytest.approx(
                pairwise_auc(labels, scores), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = make_rng(4)
        labels = rng.integers(0, 2, size=50)
        labels[:2] = [0, 1]
        scores = rng.normal(size=50)
        base = roc_auc(labels, scores)
        assert roc_auc(labels, np.exp(scores)) == pytest.approx(base, abs=1e-12)
        assert roc_auc(labels, 3 * scores - 7) == pytest.approx(base, abs=1e-12)

    def test_negation_complement_without_ties(self):
        rng = make_rng(5)
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        scores = rng.normal(size=40)
        assert roc_auc(labels, scores) + roc_auc(labels, -scores) == \
            pytest.approx(1.0, abs=1e-12)
