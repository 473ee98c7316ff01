"""Coarse pupil-point location via center-surround responses on a lightened image.

The image is first lightened so that everything at or above the 30th
luminance percentile saturates; only pupil-dark structure survives. A
center-surround response (mean of a circular ring minus mean of the inner
disc) is scored at several radii, the strongest locations become
candidates, and each candidate's dark connected component is filtered by
area and elongation. The darkest surviving component wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import PupilNotFoundError
from .imaging import adaptive_lighten, integral_image
from .validation import check_gray_image, check_point_inside

BASE_RADII = (4, 6, 8, 12, 16, 24)  # at a 640-px-wide reference frame
DARK_LEVEL = 128.0  # component threshold on the lightened image
MIN_AREA_FRACTION = 0.0005
MAX_AREA_FRACTION = 0.20
MAX_ASPECT = 3.0


@dataclass(frozen=True)
class PupilCandidate:
    point: tuple[int, int]
    response: float
    mean_luminance: float
    area: int


def scaled_radii(width: int, base=BASE_RADII) -> tuple[int, ...]:
    """Scale the reference radii by image width; dedupe, floor at 2 px."""
    scaled = sorted({max(2, int(round(r * width / 640.0))) for r in base})
    return tuple(scaled)


def _disc_spans(radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row half-widths of the rasterized disc dx^2 + dy^2 <= r^2."""
    dys = np.arange(-radius, radius + 1)
    half = np.floor(np.sqrt(np.maximum(0.0, radius * radius - dys * dys))).astype(int)
    return dys, half

def _region_sums(ii: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Full-image disc sums and in-image pixel counts via row-span lookups.

    ``ii`` is a per-row cumulative sum table with a zero column prepended:
    row sums become two lookups per (row-offset) span, so a disc of radius
    r costs O(r) image-sized operations instead of O(r^2).
    """
    h = ii.shape[0]
    w = ii.shape[1] - 1
    sums = np.zeros((h, w), dtype=np.float64)
    counts = np.zeros((h, w), dtype=np.float64)
    ys = np.arange(h)
    xs = np.arange(w)
    dys, half = _disc_spans(radius)
    for dy, hw in zip(dys, half):
        rows = ys + dy
        ok = (rows >= 0) & (rows < h)
        if not ok.any():
            continue
        x0 = np.clip(xs - hw, 0, w)
        x1 = np.clip(xs + hw + 1, 0, w)
        seg = ii[rows[ok]][:, x1] - ii[rows[ok]][:, x0]
        sums[ok] += seg
        counts[ok] += (x1 - x0)[None, :]
    return sums, counts


def _row_cumsum(image: np.ndarray) -> np.ndarray:
    h, w = image.shape
    ii = np.zeros((h, w + 1), dtype=np.float64)
    np.cumsum(image, axis=1, out=ii[:, 1:])
    return ii


def response_map(image, radius: int) -> np.ndarray:
    """Center-surround response at every pixel for one radius.

    response = mean(ring, radii (r, 2r]) - mean(disc, radius r), with both
    regions clipped to the image. Dark blobs of matching size score high.
    """
    img = check_gray_image(image)
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    ii = _row_cumsum(img)
    inner_sum, inner_cnt = _region_sums(ii, radius)
    outer_sum, outer_cnt = _region_sums(ii, 2 * radius)
    ring_sum = outer_sum - inner_sum
    ring_cnt = outer_cnt - inner_cnt
    with np.errstate(invalid="ignore", divide="ignore"):
        resp = ring_sum / ring_cnt - inner_sum / inner_cnt
    return np.where(ring_cnt > 0, resp, 0.0)


def haar_response(image, center, radius: int) -> float:
    """Center-surround response at one pixel (regions clipped to the image)."""
    img = check_gray_image(image)
    check_point_inside(center, img.shape, name="center")
    cx, cy = int(round(center[0])), int(round(center[1]))
    return float(response_map(img, radius)[cy, cx])


def _component_stats(image: np.ndarray, component: np.ndarray) -> tuple[float, float]:
    """(mean luminance on the original image, second-moment aspect ratio)."""
    ys, xs = np.nonzero(component)
    mean_lum = float(image[ys, xs].mean())
    # Add the 1/12 intra-pixel variance so single-row components stay finite.
    cov = np.cov(np.stack([xs, ys]).astype(np.float64)) if len(xs) > 1 else np.zeros((2, 2))
    cov = np.atleast_2d(cov) + np.eye(2) / 12.0
    evals = np.linalg.eigvalsh(cov)
    aspect = float(np.sqrt(evals[1] / evals[0]))
    return mean_lum, aspect


def locate_pupil_point(image, radii=None, top_k: int = 10) -> tuple[int, int]:
    """Find one interior point of the pupil.

    Scores the lightened image at all radii, keeps the top-k response
    locations, grows each candidate's dark connected component, filters
    components by area (0.05%..20% of the frame) and aspect ratio (<= 3),
    and returns the candidate whose component has the lowest mean
    luminance, breaking ties by the larger response.

    Raises:
        PupilNotFoundError: every candidate was filtered out.
    """
    img = check_gray_image(image)
    h, w = img.shape
    if radii is None:
        radii = scaled_radii(w)
    light = adaptive_lighten(img)

    best = np.full((h, w), -np.inf)
    for r in radii:
        np.maximum(best, response_map(light, r), out=best)

    flat = best.ravel()
    k = min(top_k, flat.size)
    top = np.argpartition(flat, -k)[-k:]
    top = top[np.argsort(flat[top])[::-1]]  # deterministic order, best first

    dark = light < DARK_LEVEL
    comp_labels, _ = ndimage.label(dark, structure=np.ones((3, 3), dtype=int))

    min_area = MIN_AREA_FRACTION * h * w
    max_area = MAX_AREA_FRACTION * h * w
    candidates: list[PupilCandidate] = []
    seen_components: set[int] = set()
    for idx in top:
        cy, cx = divmod(int(idx), w)
        label = comp_labels[cy, cx]
        if label == 0:
            continue  # candidate does not sit on a dark pixel
        if label in seen_components:
            continue
        seen_components.add(label)
        component = comp_labels == label
        area = int(np.count_nonzero(component))
        if area < min_area or area > max_area:
            continue
        mean_lum, aspect = _component_stats(img, component)
        if aspect > MAX_ASPECT:
            continue
        candidates.append(
            PupilCandidate(
                point=(cx, cy),
                response=float(best[cy, cx]),
                mean_luminance=mean_lum,
                area=area,
            )
        )

    if not candidates:
        raise PupilNotFoundError("no pupil found")
    candidates.sort(key=lambda c: (c.mean_luminance, -c.response))
    return candidates[0].point
