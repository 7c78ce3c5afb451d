import numpy as np
import pytest

from spadesynth.errors import DimensionError
from spadesynth.masks import SegMask, uniform_mask
from spadesynth.metrics import (
    GaussianStats, confusion_matrix, feature_stats, frechet_distance, miou,
    pixel_accuracy, save_report,
)
from spadesynth.networks import FeatureNet
from spadesynth.rng import SplitMix64


def _m(rows, labels=2):
    return SegMask(np.asarray(rows, dtype=np.int64), labels)


def _stats(mean, cov, n=100):
    return GaussianStats(mean=np.asarray(mean, np.float64),
                         cov=np.atleast_2d(np.asarray(cov, np.float64)),
                         sample_count=n)


class TestSegScores:
    def test_half_right_worked_example(self):
        gt = _m([[0, 0], [0, 0]])
        pred = _m([[0, 0], [1, 1]])
        assert pixel_accuracy(pred, gt) == pytest.approx(0.5)
        # label 0: IoU 1/2; label 1: IoU 0; mean 0.25
        assert miou(pred, gt) == pytest.approx(0.25)

    def test_perfect_prediction(self):
        gt = _m([[0, 1], [2, 3]], labels=4)
        assert miou(gt, gt) == 1.0
        assert pixel_accuracy(gt, gt) == 1.0

    def test_total_disagreement(self):
        gt = uniform_mask(0, 4, 2)
        pred = uniform_mask(1, 4, 2)
        assert miou(pred, gt) == 0.0
        assert pixel_accuracy(pred, gt) == 0.0

    def test_absent_labels_excluded_from_mean(self):
        # only labels 0 and 1 occur; label 2 must not drag the mean down
        gt = _m([[0, 0], [1, 1]], labels=3)
        assert miou(gt, gt) == 1.0

    def test_confusion_layout(self):
        gt = _m([[0, 0], [1, 1]])
        pred = _m([[0, 1], [1, 1]])
        cm = confusion_matrix(gt, pred)
        assert cm.tolist() == [[1, 1], [0, 2]]
        assert cm.sum() == 4

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            miou(uniform_mask(0, 4, 2), uniform_mask(0, 8, 2))


class TestFrechet:
    def test_identical_distributions(self):
        s = _stats([0.0, 1.0], np.eye(2))
        assert frechet_distance(s, s) == 0.0

    def test_mean_shift_only(self):
        # unit covariances cancel: distance is the squared mean gap, here 4
        a = _stats([0.0] * 4, np.eye(4))
        b = _stats([1.0] * 4, np.eye(4))
        assert frechet_distance(a, b) == pytest.approx(4.0, abs=1e-6)

    def test_variance_gap_1d(self):
        a = _stats([0.0], [[1.0]])
        b = _stats([0.0], [[4.0]])
        # 1 + 4 - 2*sqrt(4) = 1
        assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        q = rng.normal(size=(5, 5))
        r = rng.normal(size=(5, 5))
        a = _stats(rng.normal(size=5), q @ q.T + np.eye(5))
        b = _stats(rng.normal(size=5), r @ r.T + np.eye(5))
        ab, ba = frechet_distance(a, b), frechet_distance(b, a)
        assert ab == pytest.approx(ba, rel=1e-9)
        assert ab > 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            frechet_distance(_stats([0.0], [[1.0]]), _stats([0.0, 0.0], np.eye(2)))

    def test_nonfinite_rejected(self):
        bad = _stats([np.nan], [[1.0]])
        with pytest.raises(DimensionError):
            frechet_distance(bad, bad)

    def test_stats_validation(self):
        with pytest.raises(DimensionError):
            GaussianStats(np.zeros(2), np.eye(2), sample_count=1)
        skew = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(DimensionError):
            GaussianStats(np.zeros(2), skew, sample_count=10)


class TestFeatureStats:
    def test_duplicated_batch_collapses_covariance(self):
        one = SplitMix64(0x61).normal((1, 3, 32, 32)).astype(np.float32)
        batch = np.repeat(one, 8, axis=0)
        stats = feature_stats(batch, FeatureNet())
        assert np.max(np.abs(stats.cov)) < 1e-8
        assert stats.sample_count == 8

    def test_embedding_dimension(self):
        batch = SplitMix64(0x62).normal((4, 3, 32, 32)).astype(np.float32)
        stats = feature_stats(batch, FeatureNet())
        assert stats.mean.shape == (32,)
        assert stats.cov.shape == (32, 32)

    def test_single_image_rejected(self):
        with pytest.raises(DimensionError):
            feature_stats(np.zeros((1, 3, 32, 32), np.float32), FeatureNet())

    def test_self_distance_near_zero(self):
        batch = SplitMix64(0x63).normal((6, 3, 32, 32)).astype(np.float32)
        s = feature_stats(batch, FeatureNet())
        assert frechet_distance(s, s) < 1e-8


def test_save_report(tmp_path):
    path = str(tmp_path / "report.txt")
    save_report(path, {"miou": 0.25, "steps": 600}, confusion=np.eye(2, dtype=np.int64))
    text = open(path).read()
    assert "miou=0.25" in text and "steps=600" in text
    csv = open(path + ".confusion.csv").read().splitlines()
    assert csv == ["1,0", "0,1"]
