"""Mask scoring: per-class IoU against ground truth.

Conventions, applied uniformly: two empty masks agree perfectly (IoU 1),
an empty mask against a non-empty one scores 0, and an image the pipeline
failed on (prediction ``None``) scores 0 for every class. Means are taken
over all requested images, failures included.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CLASSES = ("pupil", "iris", "eye")


def iou(pred, truth) -> float:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    inter = int(np.count_nonzero(pred & truth))
    union = int(np.count_nonzero(pred | truth))
    if union == 0:
        return 1.0
    return inter / union


@dataclass
class EvalReport:
    per_image: dict          # id -> {"pupil": float, "iris": float, "eye": float} or None
    means: dict              # class -> mean over all images (failures as 0)
    n_images: int
    n_failures: int
    notes: dict = field(default_factory=dict)


def evaluate(predictions: dict, ground_truth: dict, notes: dict | None = None) -> EvalReport:
    """Score predictions (id -> MaskSet or None) against ground truth."""
    missing = set(ground_truth) - set(predictions)
    if missing:
        raise ValueError(f"predictions missing ids: {sorted(missing)[:5]}")
    per_image = {}
    sums = {c: 0.0 for c in CLASSES}
    failures = 0
    for image_id in sorted(ground_truth):
        pred = predictions[image_id]
        gt = ground_truth[image_id]
        if pred is None:
            per_image[image_id] = None
            failures += 1
            continue
        scores = {
            "pupil": iou(pred.pupil, gt.pupil),
            "iris": iou(pred.iris, gt.iris),
            "eye": iou(pred.eye, gt.eye),
        }
        per_image[image_id] = scores
        for c in CLASSES:
            sums[c] += scores[c]
    n = len(ground_truth)
    means = {c: (sums[c] / n if n else 0.0) for c in CLASSES}
    return EvalReport(
        per_image=per_image,
        means=means,
        n_images=n,
        n_failures=failures,
        notes=dict(notes or {}),
    )


def report_text(report: EvalReport) -> str:
    lines = [
        "eye segmentation scores (IoU; empty vs empty = 1, failed image = 0)",
        f"images: {report.n_images}  failures: {report.n_failures}",
    ]
    for key, value in sorted(report.notes.items()):
        lines.append(f"{key}: {value}")
    lines.append("")
    lines.append(f"{'id':<10}{'pupil':>8}{'iris':>8}{'eye':>8}")
    for image_id, scores in report.per_image.items():
        if scores is None:
            lines.append(f"{image_id:<10}{'fail':>8}{'fail':>8}{'fail':>8}")
        else:
            lines.append(
                f"{image_id:<10}{scores['pupil']:>8.3f}{scores['iris']:>8.3f}{scores['eye']:>8.3f}"
            )
    lines.append(
        f"{'mean':<10}{report.means['pupil']:>8.3f}{report.means['iris']:>8.3f}{report.means['eye']:>8.3f}"
    )
    return "\n".join(lines) + "\n"


def report_json(report: EvalReport) -> str:
    payload = {
        "n_images": report.n_images,
        "n_failures": report.n_failures,
        "means": report.means,
        "per_image": report.per_image,
        "notes": report.notes,
        "conventions": "IoU; both empty = 1, one empty = 0, failed image = 0 for all classes",
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
