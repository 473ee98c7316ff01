"""Eye-region indications: smoothness cues, prompt sampling, and boundary
refinement through a promptable segmentation oracle.

The initial indication marks the predicted pupil/iris as foreground and,
on every ray's suffix beyond that region, splits the smooth samples 30/30:
the first 30% (sclera side) become foreground, the last 30% (skin side)
become background, everything else stays ignored. Prompts are drawn from
an n x n grid over those labels, the oracle's mask is walked along the
rays for its boundary, and boundary points near curvature spikes are
deleted before the retained contour is rasterized back into labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import labels as L
from .imaging import sobel_gradients, window_counts, windowed_sums
from .rays import RayFan
from .validation import check_gray_image, check_mask, check_window_side


@dataclass(frozen=True)
class EyeRegionParams:
    """Knobs for the eye-region indication stage."""

    gstd_window: int = 5            # smoothness window side, pixels
    gstd_threshold: float = 5.0     # smooth iff local gradient-magnitude std < this
    smooth_fraction: float = 0.3    # share of smooth suffix samples labeled per side
    grid_size: int = 10             # prompts come from an n x n grid
    neighborhood: int = 30          # curvature check spans this many boundary points
    curvature_threshold: float = 20.0  # |second difference| above this is a spike

    def __post_init__(self):
        check_window_side(self.gstd_window, "gstd_window")
        if self.gstd_threshold <= 0:
            raise ValueError("gstd_threshold must be positive")
        if not (0 < self.smooth_fraction < 0.5):
            raise ValueError("smooth_fraction must be in (0, 0.5)")
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.neighborhood < 1:
            raise ValueError("neighborhood must be >= 1")
        if self.curvature_threshold <= 0:
            raise ValueError("curvature_threshold must be positive")


@dataclass
class SmoothnessMap:
    """Per-pixel local gradient-magnitude deviation and its threshold flag."""

    gstd: np.ndarray
    smooth: np.ndarray
    threshold: float


@dataclass(frozen=True)
class Prompt:
    point: tuple[int, int]
    positive: bool


@dataclass
class BoundaryPoints:
    """Oracle-boundary crossings along the fan.

    ``distance[i]`` is the boundary sample's distance from the origin on
    ray i; NaN where the ray had no usable crossing. ``present`` flags the
    usable rays.
    """

    distance: np.ndarray
    present: np.ndarray

    def positions(self, fan: RayFan) -> list[tuple[float, float]]:
        return [
            fan.point_at(i, float(self.distance[i]))
            for i in np.flatnonzero(self.present)
        ]


@dataclass
class EyeIndications:
    """Eye-region label map plus the geometry that produced it."""

    labels: np.ndarray
    fan: RayFan
    boundary: BoundaryPoints | None = None
    refined: bool = False
    params: EyeRegionParams = field(default_factory=EyeRegionParams)


def gstd_map(image_or_field, params: EyeRegionParams | None = None) -> SmoothnessMap:
    """Windowed population std of gradient magnitudes, plus the smooth flag.

    Accepts either a grayscale image (gradients computed here) or a ready
    (h, w, 2) gradient field. A pixel is smooth iff the standard deviation
    of the gradient magnitudes over its clipped window is strictly below
    the threshold.
    """
    params = params or EyeRegionParams()
    arr = np.asarray(image_or_field)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        f = arr.astype(np.float64, copy=False)
    else:
        f = sobel_gradients(check_gray_image(arr))
    mags = np.hypot(f[..., 0], f[..., 1])
    counts = window_counts(mags.shape, params.gstd_window)
    m1 = windowed_sums(mags, params.gstd_window) / counts
    m2 = windowed_sums(mags * mags, params.gstd_window) / counts
    var = np.maximum(m2 - m1 * m1, 0.0)
    gstd = np.sqrt(var)
    return SmoothnessMap(gstd=gstd, smooth=gstd < params.gstd_threshold,
                         threshold=params.gstd_threshold)


def initial_eye_indication(
    smooth_map: SmoothnessMap,
    region_mask,
    fan: RayFan,
    params: EyeRegionParams | None = None,
) -> EyeIndications:
    """Bootstrap eye labels from the pupil/iris region and smoothness cues.

    Every pixel of the region mask is foreground. On each ray's suffix
    beyond its exit from the region, the smooth samples are collected in
    order; the first 30% become foreground, the last 30% background, the
    middle and all rough samples stay ignored. Rays that never leave the
    region contribute nothing beyond it.
    """
    params = params or EyeRegionParams()
    region = check_mask(region_mask, shape=fan.shape, name="region mask")
    if not region.any():
        raise ValueError("region mask is empty")
    labels = np.zeros(fan.shape, dtype=np.uint8)

    inside = fan.sample_flags(region)
    smooth = fan.sample_flags(smooth_map.smooth)
    fg_x, fg_y, bg_x, bg_y = [], [], [], []
    for i in range(fan.n_rays):
        n = fan.lengths[i]
        row_inside = inside[i, :n]
        outside = np.flatnonzero(~row_inside)
        if len(outside) == 0:
            continue  # never exits: nothing labeled beyond the region
        exit_t = outside[0]
        suffix = np.arange(exit_t, n)
        smooth_ts = suffix[smooth[i, exit_t:n]]
        n_side = int(len(smooth_ts) * params.smooth_fraction)
        if n_side == 0:
            continue
        head = smooth_ts[:n_side]
        tail = smooth_ts[-n_side:]
        fg_x.append(fan.px[i, head]); fg_y.append(fan.py[i, head])
        bg_x.append(fan.px[i, tail]); bg_y.append(fan.py[i, tail])

    # Background first, then foreground, then the region itself: shared
    # pixels keep the foreground claim no matter the ray order.
    if bg_x:
        labels[np.concatenate(bg_y), np.concatenate(bg_x)] = L.EYE_BG
    if fg_x:
        labels[np.concatenate(fg_y), np.concatenate(fg_x)] = L.EYE_FG
    labels[region] = L.EYE_FG
    return EyeIndications(labels=labels, fan=fan, params=params)


def grid_prompts(label_map, grid_size: int, seed: int) -> list[Prompt]:
    """One seeded prompt per grid cell that has any committed label.

    The frame splits into grid_size x grid_size cells (floor-division
    edges; the last row/column absorbs the remainder). A cell's polarity
    follows the majority among foreground (positive) versus background
    and eye-background (negative) pixels, ties going negative; one pixel
    of the winning polarity is drawn uniformly with the seeded generator.
    """
    arr = np.asarray(label_map)
    if arr.ndim != 2:
        raise ValueError("label map must be 2-D")
    h, w = arr.shape
    n = int(grid_size)
    if n < 1:
        raise ValueError("grid_size must be >= 1")
    rng = np.random.default_rng(seed)
    cell_h = max(1, h // n)
    cell_w = max(1, w // n)
    prompts: list[Prompt] = []
    for gy in range(n):
        y0 = gy * cell_h
        y1 = h if gy == n - 1 else min(h, (gy + 1) * cell_h)
        if y0 >= h:
            break
        for gx in range(n):
            x0 = gx * cell_w
            x1 = w if gx == n - 1 else min(w, (gx + 1) * cell_w)
            if x0 >= w:
                break
            cell = arr[y0:y1, x0:x1]
            pos = cell == L.EYE_FG
            neg = (cell == L.EYE_BG) | (cell == L.BACKGROUND)
            n_pos = int(np.count_nonzero(pos))
            n_neg = int(np.count_nonzero(neg))
            if n_pos + n_neg == 0:
                continue
            positive = n_pos > n_neg  # tie -> negative
            pool = pos if positive else neg
            ys, xs = np.nonzero(pool)
            pick = int(rng.integers(len(xs)))
            prompts.append(
                Prompt(point=(x0 + int(xs[pick]), y0 + int(ys[pick])), positive=positive)
            )
    return prompts


def extract_boundary(oracle_mask, fan: RayFan) -> BoundaryPoints:
    """Nearest positive-to-nonpositive crossing along each ray.

    The boundary sample is the last positive one before the first exit, so
    everything between the origin and the boundary is positive and the
    next sample is not. A ray starting outside the positive region, or
    never leaving it inside the frame, has no crossing.
    """
    mask = check_mask(oracle_mask, shape=fan.shape, name="oracle mask")
    pos = fan.sample_flags(mask)
    n = fan.n_rays
    distance = np.full(n, np.nan)
    present = np.zeros(n, dtype=bool)
    for i in range(n):
        row = pos[i, : fan.lengths[i]]
        if len(row) == 0 or not row[0]:
            continue
        off = np.flatnonzero(~row)
        if len(off) == 0:
            continue  # still positive at the image border
        distance[i] = float(off[0] - 1)
        present[i] = True
    return BoundaryPoints(distance=distance, present=present)


def second_differences(boundary: BoundaryPoints) -> np.ndarray:
    """Circular second differences of the boundary distances by ray index.

    NaN where the point or either ray-index neighbor is absent; callers
    treat NaN as exceeding any threshold.
    """
    dist = boundary.distance
    present = boundary.present
    n = len(dist)
    out = np.full(n, np.nan)
    for i in np.flatnonzero(present):
        ip = (i - 1) % n
        iq = (i + 1) % n
        if present[ip] and present[iq]:
            out[i] = dist[iq] - 2.0 * dist[i] + dist[ip]
    return out


def second_derivative_filter(
    boundary: BoundaryPoints, params: EyeRegionParams | None = None
) -> BoundaryPoints:
    """Delete boundary points near curvature spikes.

    Retained points are scanned in circular order; a point is deleted iff
    any point within neighborhood//2 positions on either side (itself
    included) has an undefined second difference or one whose magnitude
    exceeds the threshold.
    """
    params = params or EyeRegionParams()
    d2 = second_differences(boundary)
    idx = np.flatnonzero(boundary.present)
    m = len(idx)
    keep = boundary.present.copy()
    if m == 0:
        return BoundaryPoints(distance=boundary.distance.copy(), present=keep)
    bad = np.isnan(d2[idx]) | (np.abs(d2[idx]) > params.curvature_threshold)
    half = params.neighborhood // 2
    for pos_i in range(m):
        lo = pos_i - half
        hi = pos_i + half
        window = [(j % m) for j in range(lo, hi + 1)]
        if any(bad[j] for j in set(window)):
            keep[idx[pos_i]] = False
    distance = np.where(keep, boundary.distance, np.nan)
    return BoundaryPoints(distance=distance, present=keep)


def refined_indication(
    boundary: BoundaryPoints, fan: RayFan, params: EyeRegionParams | None = None
) -> EyeIndications:
    """Label each retained ray foreground up to its boundary, background beyond.

    Rays without a retained boundary point contribute nothing. If nothing
    was retained the map is all-ignore and the caller should fall back to
    the initial indications.
    """
    params = params or EyeRegionParams()
    labels = np.zeros(fan.shape, dtype=np.uint8)
    fg_x, fg_y, bg_x, bg_y = [], [], [], []
    for i in np.flatnonzero(boundary.present):
        n = fan.lengths[i]
        cut = int(np.floor(boundary.distance[i]))
        ts = np.arange(n)
        insel = ts <= cut
        fg_x.append(fan.px[i, :n][insel]); fg_y.append(fan.py[i, :n][insel])
        bg_x.append(fan.px[i, :n][~insel]); bg_y.append(fan.py[i, :n][~insel])
    if bg_x:
        labels[np.concatenate(bg_y), np.concatenate(bg_x)] = L.EYE_BG
    if fg_x:
        labels[np.concatenate(fg_y), np.concatenate(fg_x)] = L.EYE_FG
    return EyeIndications(labels=labels, fan=fan, boundary=boundary,
                          refined=True, params=params)


def refine_eye_indications(
    image,
    initial: EyeIndications,
    oracle,
    params: EyeRegionParams | None = None,
    seed: int = 0,
    image_id: str | None = None,
) -> EyeIndications:
    """Run one oracle refinement pass over initial eye indications.

    Falls back to the initial indications when no positive prompt exists
    or when the curvature filter deletes every boundary point.
    """
    from .oracle import SegmentationRequest

    params = params or EyeRegionParams()
    img = check_gray_image(image)
    prompts = grid_prompts(initial.labels, params.grid_size, seed)
    positive = [p.point for p in prompts if p.positive]
    negative = [p.point for p in prompts if not p.positive]
    if not positive:
        return initial
    request = SegmentationRequest(
        image=img, positive=positive, negative=negative, image_id=image_id
    )
    response = oracle.segment(request)
    boundary = extract_boundary(response.mask, initial.fan)
    retained = second_derivative_filter(boundary, params)
    if not retained.present.any():
        return initial
    return refined_indication(retained, initial.fan, params)
