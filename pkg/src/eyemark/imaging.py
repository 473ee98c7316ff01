"""Low-level image operations: Sobel gradients, integral images, window votes.

Conventions used throughout the package:

* images are float64 arrays indexed ``[y, x]`` with x growing rightward and
  y downward, luminance in [0, 255];
* gradient fields have shape (h, w, 2) storing (gx, gy); the gradient points
  from dark toward light;
* a square window of side ``s`` centered at (x, y) covers offsets
  ``-(s-1)//2 .. s//2`` on each axis (symmetric for odd s, one extra
  pixel on the high side for even s), clipped to the image.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .validation import (
    check_gradient_field,
    check_gray_image,
    check_window_side,
)

# 3x3 Sobel kernels, applied by correlation. Unit ramp slope -> response 8.
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()


def sobel_gradients(image) -> np.ndarray:
    """Per-pixel Sobel gradient field with replicate border padding.

    Returns an (h, w, 2) float64 array of (gx, gy). 8-bit inputs are
    promoted to float64 before filtering.
    """
    img = check_gray_image(image)
    gx = ndimage.correlate(img, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, SOBEL_Y, mode="nearest")
    return np.stack([gx, gy], axis=-1)


def gradient_magnitude(field) -> np.ndarray:
    """Euclidean magnitude of an (h, w, 2) gradient field."""
    f = check_gradient_field(field)
    return np.hypot(f[..., 0], f[..., 1])


def integral_image(values) -> np.ndarray:
    """Summed-area table with a zero top row/left column.

    ``box_sum(ii, y0, y1, x0, x1)`` then gives the inclusive-box sum.
    """
    arr = np.asarray(values, dtype=np.float64)
    ii = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.float64)
    np.cumsum(arr, axis=0, out=ii[1:, 1:])
    np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
    return ii


def box_sum(ii: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> float:
    """Sum over the inclusive box [y0..y1] x [x0..x1] of the original array."""
    return ii[y1 + 1, x1 + 1] - ii[y0, x1 + 1] - ii[y1 + 1, x0] + ii[y0, x0]


def window_bounds(center_x: int, center_y: int, side: int, shape) -> tuple:
    """Clipped inclusive bounds (y0, y1, x0, x1) of a square window."""
    lo = (side - 1) // 2
    hi = side // 2
    h, w = shape[:2]
    y0 = max(0, center_y - lo)
    y1 = min(h - 1, center_y + hi)
    x0 = max(0, center_x - lo)
    x1 = min(w - 1, center_x + hi)
    return y0, y1, x0, x1


def window_counts(shape, side: int) -> np.ndarray:
    """Per-pixel count of in-image pixels of the clipped window (vectorized)."""
    side = check_window_side(side)
    h, w = shape[:2]
    lo = (side - 1) // 2
    hi = side // 2
    ys = np.arange(h)
    xs = np.arange(w)
    rows = np.minimum(h - 1, ys + hi) - np.maximum(0, ys - lo) + 1
    cols = np.minimum(w - 1, xs + hi) - np.maximum(0, xs - lo) + 1
    return rows[:, None] * cols[None, :]


def windowed_sums(values, side: int) -> np.ndarray:
    """Per-pixel sum of ``values`` over the clipped square window.

    Uses a summed-area table; exact for integer-valued inputs.
    """
    side = check_window_side(side)
    arr = np.asarray(values, dtype=np.float64)
    h, w = arr.shape
    lo = (side - 1) // 2
    hi = side // 2
    ii = integral_image(arr)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.maximum(0, ys - lo)
    y1 = np.minimum(h - 1, ys + hi) + 1
    x0 = np.maximum(0, xs - lo)
    x1 = np.minimum(w - 1, xs + hi) + 1
    return (
        ii[np.ix_(y1, x1)]
        - ii[np.ix_(y0, x1)]
        - ii[np.ix_(y1, x0)]
        + ii[np.ix_(y0, x0)]
    )


def window_fraction_satisfying(field, center, side: int, predicate) -> float:
    """Fraction of clipped-window pixels whose gradient satisfies a predicate.

    Args:
        field: (h, w, 2) gradient field.
        center: integer (x, y) window center; may lie outside the image as
            long as the clipped window is non-empty.
        side: window side in pixels.
        predicate: callable mapping an (n, m, 2) field slice to an (n, m)
            boolean array. Zero gradients must never satisfy directional
            predicates; the stock predicates here guarantee that.

    Returns:
        count(satisfying) / count(window pixels inside the image).
    """
    f = check_gradient_field(field)
    side = check_window_side(side)
    cx, cy = int(center[0]), int(center[1])
    y0, y1, x0, x1 = window_bounds(cx, cy, side, f.shape)
    if y0 > y1 or x0 > x1:
        raise ValueError(f"window centered at {(cx, cy)} misses the image entirely")
    patch = f[y0 : y1 + 1, x0 : x1 + 1]
    sat = np.asarray(predicate(patch), dtype=bool)
    if sat.shape != patch.shape[:2]:
        raise ValueError("predicate must return one boolean per window pixel")
    return float(np.count_nonzero(sat)) / float(sat.size)


def adaptive_lighten(image, percentile: float = 30.0) -> np.ndarray:
    """Saturate everything at or above the given luminance percentile.

    Values >= the percentile threshold map to 255; darker values are
    stretched linearly onto [0, 255], preserving their ordering. A
    non-positive threshold (all-black input) returns the image unchanged.
    """
    img = check_gray_image(image)
    t = float(np.percentile(img, percentile))
    if t <= 0.0:
        return img.copy()
    out = np.where(img >= t, 255.0, img * (255.0 / t))
    return out
