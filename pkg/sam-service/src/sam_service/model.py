"""Mask backends: the deterministic stub and the real model wrapper."""

from __future__ import annotations

import threading

import numpy as np

STUB_RADIUS_DIVISOR = 4


class StubDiscBackend:
    """Deterministic stand-in for integration tests.

    Answers every request with a filled disc centered on the mean of the
    positive points, radius min(height, width) // 4, confidence 1.0.
    Negative points are accepted and ignored.
    """

    name = "stub-disc"

    def predict(self, image: np.ndarray, positive, negative) -> tuple[np.ndarray, float]:
        h, w = image.shape
        points = np.asarray(positive, dtype=np.float64)
        cx = float(points[:, 0].mean())
        cy = float(points[:, 1].mean())
        radius = min(h, w) // STUB_RADIUS_DIVISOR
        yy, xx = np.mgrid[0:h, 0:w]
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
        return mask, 1.0


def _model_type_for(checkpoint: str) -> str:
    """Model variant from the conventional checkpoint file name."""
    lowered = checkpoint.lower()
    for variant in ("vit_h", "vit_l", "vit_b"):
        if variant in lowered:
            return variant
    return "vit_h"


class RealModelBackend:
    """Wrapper around the pretrained promptable segmentation model.

    Loading is heavyweight, so construction only records the settings;
    call load() to bring the weights up. Inference is serialized with a
    per-instance lock because the underlying predictor keeps mutable
    per-image state on its device.
    """

    name = "model"

    def __init__(self, checkpoint: str, device: str = "cpu"):
        self.checkpoint = checkpoint
        self.device = device
        self._predictor = None
        self._lock = threading.Lock()

    def load(self) -> None:
        from segment_anything import SamPredictor, sam_model_registry

        build = sam_model_registry[_model_type_for(self.checkpoint)]
        model = build(checkpoint=self.checkpoint)
        model.to(self.device)
        self._predictor = SamPredictor(model)

    @property
    def loaded(self) -> bool:
        return self._predictor is not None

    def predict(self, image: np.ndarray, positive, negative) -> tuple[np.ndarray, float]:
        if self._predictor is None:
            raise RuntimeError("model not loaded")
        points = np.asarray(list(positive) + list(negative), dtype=np.float64)
        labels = np.array([1] * len(positive) + [0] * len(negative))
        rgb = np.repeat(image[:, :, None], 3, axis=2)
        with self._lock:
            self._predictor.set_image(rgb)
            masks, scores, _ = self._predictor.predict(
                point_coords=points, point_labels=labels, multimask_output=True
            )
        best = int(np.argmax(scores))
        return masks[best].astype(bool), float(scores[best])
