"""Shared helpers for the service tests."""

from __future__ import annotations

import base64
import io

import numpy as np
import pytest
from PIL import Image

from sam_service.config import ServiceConfig


def encode_gray(image: np.ndarray) -> str:
    """Grayscale array -> base64 PNG string, the wire image encoding."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_mask(payload: str) -> np.ndarray:
    """Base64 PNG mask -> boolean array, checking the 0/255 contract."""
    with Image.open(io.BytesIO(base64.b64decode(payload))) as img:
        img.load()
        assert img.mode == "L"
        arr = np.asarray(img)
    assert set(np.unique(arr)) <= {0, 255}
    return arr > 0


def expected_disc(shape, positive) -> np.ndarray:
    """The documented stub response, recomputed independently."""
    h, w = shape
    points = np.asarray(positive, dtype=float)
    cx = points[:, 0].mean()
    cy = points[:, 1].mean()
    radius = min(h, w) // 4
    yy, xx = np.mgrid[0:h, 0:w]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2


def gradient_image(h: int, w: int) -> np.ndarray:
    col = np.linspace(20, 230, w)
    return np.tile(col, (h, 1)).astype(np.uint8)


@pytest.fixture
def stub_config() -> ServiceConfig:
    return ServiceConfig(stub_disc=True)
