"""Input validation helpers.

Small check_* functions in the spirit of sklearn's check_array: coerce to
the canonical dtype/shape and raise ValueError with a readable message
when the input cannot be used.
"""

from __future__ import annotations

import numpy as np


def check_gray_image(image, shape=None, name: str = "image") -> np.ndarray:
    """Coerce to a 2-D float64 luminance array, values expected in [0, 255]."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (h, w), got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_gradient_field(field, name: str = "field") -> np.ndarray:
    """Coerce to an (h, w, 2) float64 gradient field."""
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{name} must have shape (h, w, 2), got {arr.shape}")
    return arr


def check_mask(mask, shape=None, name: str = "mask") -> np.ndarray:
    """Coerce to a 2-D boolean mask, optionally enforcing a shape."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr.astype(bool, copy=False)


def check_point(point, name: str = "point") -> tuple[float, float]:
    """Coerce to an (x, y) float pair."""
    try:
        x, y = point
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be an (x, y) pair") from exc
    x = float(x)
    y = float(y)
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError(f"{name} must be finite, got {(x, y)}")
    return x, y


def check_point_inside(point, shape, name: str = "point") -> tuple[float, float]:
    """Validate that an (x, y) point lies inside an image of the given shape."""
    x, y = check_point(point, name=name)
    h, w = shape[:2]
    if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
        raise ValueError(f"{name} {(x, y)} lies outside a {w}x{h} image")
    return x, y


def check_window_side(side, name: str = "side") -> int:
    s = int(side)
    if s < 1:
        raise ValueError(f"{name} must be >= 1, got {side}")
    return s
