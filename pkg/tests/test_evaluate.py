"""Scoring: IoU axioms, failure accounting, report rendering."""

import json

import numpy as np
import pytest

from eyemark.densify import MaskSet
from eyemark.evaluate import evaluate, iou, report_json, report_text


def box_mask(h, w, y0, y1, x0, x1):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


class TestIoU:
    def test_identical_masks_score_one(self):
        m = box_mask(10, 10, 2, 8, 3, 9)
        assert iou(m, m) == 1.0

    def test_both_empty_score_one(self):
        z = np.zeros((5, 5), dtype=bool)
        assert iou(z, z) == 1.0

    def test_one_empty_scores_zero(self):
        m = box_mask(5, 5, 0, 2, 0, 2)
        z = np.zeros((5, 5), dtype=bool)
        assert iou(m, z) == 0.0
        assert iou(z, m) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        a = rng.random((12, 12)) > 0.5
        b = rng.random((12, 12)) > 0.5
        assert iou(a, b) == iou(b, a)

    def test_known_overlap_value(self):
        a = box_mask(10, 10, 0, 4, 0, 10)   # 40 px
        b = box_mask(10, 10, 2, 6, 0, 10)   # 40 px, overlap 20
        assert iou(a, b) == pytest.approx(20 / 60)

    def test_shrinking_the_overlap_lowers_the_score(self):
        truth = box_mask(20, 20, 5, 15, 5, 15)
        scores = [
            iou(box_mask(20, 20, 5, 15, 5, 15 - cut), truth) for cut in range(5)
        ]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_shape_mismatch_is_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            iou(np.zeros((4, 4), bool), np.zeros((5, 5), bool))


def mask_set(shape=(20, 20), shift=0):
    pupil = box_mask(*shape, 8, 12, 8 + shift, 12 + shift)
    iris = box_mask(*shape, 5, 15, 5 + shift, 15 + shift) & ~pupil
    eye = box_mask(*shape, 3, 17, 3 + shift, 17 + shift)
    return MaskSet(pupil=pupil, iris=iris, eye=eye)


class TestEvaluate:
    def test_perfect_predictions_score_one(self):
        gt = {"a": mask_set(), "b": mask_set(shift=2)}
        pred = {"a": mask_set(), "b": mask_set(shift=2)}
        report = evaluate(pred, gt)
        assert report.means == {"pupil": 1.0, "iris": 1.0, "eye": 1.0}
        assert report.n_images == 2
        assert report.n_failures == 0

    def test_failures_count_as_zero_in_the_mean(self):
        gt = {"a": mask_set(), "b": mask_set()}
        pred = {"a": mask_set(), "b": None}
        report = evaluate(pred, gt)
        assert report.per_image["b"] is None
        assert report.n_failures == 1
        assert report.means["pupil"] == pytest.approx(0.5), (
            "means run over all images, failures scoring 0"
        )

    def test_missing_prediction_id_is_an_error(self):
        gt = {"a": mask_set(), "b": mask_set()}
        with pytest.raises(ValueError, match="missing ids"):
            evaluate({"a": mask_set()}, gt)

    def test_extra_predictions_are_ignored(self):
        gt = {"a": mask_set()}
        pred = {"a": mask_set(), "zz": mask_set()}
        report = evaluate(pred, gt)
        assert list(report.per_image) == ["a"]

    def test_notes_are_carried_through(self):
        gt = {"a": mask_set()}
        report = evaluate({"a": mask_set()}, gt, notes={"oracle": "mock"})
        assert report.notes == {"oracle": "mock"}


class TestReports:
    @pytest.fixture
    def report(self):
        gt = {"0000": mask_set(), "0001": mask_set()}
        pred = {"0000": mask_set(), "0001": None}
        return evaluate(pred, gt, notes={"rounds": 4})

    def test_text_report_layout(self, report):
        text = report_text(report)
        lines = text.splitlines()
        assert "IoU" in lines[0], "conventions line must lead the report"
        assert "images: 2  failures: 1" in text
        assert "rounds: 4" in text
        assert any(line.startswith("0001") and "fail" in line for line in lines)
        assert lines[-1].startswith("mean")

    def test_json_report_round_trips(self, report):
        payload = json.loads(report_json(report))
        assert payload["n_images"] == 2
        assert payload["n_failures"] == 1
        assert payload["per_image"]["0001"] is None
        assert payload["per_image"]["0000"]["pupil"] == 1.0
        assert "conventions" in payload
        assert payload["notes"] == {"rounds": 4}
