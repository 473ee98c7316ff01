"""Progressive multi-round segmentation driver.

Round 0 bootstraps from the dark-blob seed point and densifies the pupil
and iris. Later rounds re-anchor the ray fan at the current pupil
centroid, rebuild the radial indications, optionally prune them against
the luminance prior learned from the previous round's masks, and from a
configurable round onward add the eye-region stage (smoothness seeds,
optional oracle refinement, contour densification). Every source of
randomness derives from one seed, so a run is reproducible bit for bit.
"""

from __future__ import annotations

import dataclasses
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .densify import (
    EllipseParams,
    MaskSet,
    densify_pupil_iris,
    eye_mask_from_indications,
    masks_from_ellipses,
    rasterize_ellipse,
)
from .exceptions import (
    EmptyMaskError,
    EyemarkError,
    FitError,
    OracleTransportError,
)
from .eye_region import (
    EyeRegionParams,
    gstd_map,
    initial_eye_indication,
    refine_eye_indications,
)
from .locate import locate_pupil_point
from .pupil_iris import (
    PupilIrisIndications,
    PupilIrisParams,
    generate_pupil_iris_indications,
)
from .rays import RayFan
from .validation import check_gray_image, check_mask

# Pupil-centroid drift (pixels) below which a refreshed radial fit is
# considered jitter and the previous geometry is kept.
CONVERGENCE_DRIFT = 3.0

# Consecutive prior-contradicted samples needed before a span is trimmed;
# a single sample can straddle the boundary by quantization alone.
PRIOR_RUN = 2

# Samples at the very end of the pupil span are excluded from the trim
# scan: a soft boundary ramp crosses the luminance midpoint a pixel or
# two early even on a perfectly converged ray.
PRIOR_EDGE_MARGIN = 2


@dataclass(frozen=True)
class Schedule:
    """Round plan: how many rounds run and when the eye stage joins."""

    total_rounds: int = 4
    start_round: int | None = None    # default: ceil(0.25 * total_rounds)
    refresh_interval: int = 1

    def __post_init__(self):
        if self.total_rounds < 1:
            raise ValueError(f"total_rounds must be >= 1, got {self.total_rounds}")
        if self.refresh_interval < 1:
            raise ValueError(f"refresh_interval must be >= 1, got {self.refresh_interval}")
        if self.start_round is None:
            object.__setattr__(
                self, "start_round", math.ceil(0.25 * self.total_rounds)
            )
        if not 1 <= self.start_round:
            raise ValueError(f"start_round must be >= 1, got {self.start_round}")

    @property
    def eye_rounds(self) -> tuple[int, ...]:
        return tuple(
            r
            for r in range(self.start_round, self.total_rounds)
            if (r - self.start_round) % self.refresh_interval == 0
        )


@dataclass
class PipelineResult:
    masks: dict                       # image_id -> MaskSet or None
    failures: dict                    # image_id -> reason string
    schedule: Schedule
    history: dict | None = None       # image_id -> [MaskSet per round]
    oracle_fallbacks: dict | None = None  # image_id -> rounds that fell back

    @property
    def n_failures(self) -> int:
        return len(self.failures)


def derive_seed(seed: int, image_id: str, round_index: int) -> int:
    """Stable per-image, per-round seed (process independent)."""
    tag = zlib.crc32(f"{image_id}:{round_index}".encode("utf-8"))
    return (seed * 1_000_003 + tag) % (2**31)


def pupil_center(mask) -> tuple[float, float]:
    """Centroid (x, y) of a boolean mask."""
    mask = check_mask(mask, name="pupil mask")
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyMaskError("cannot take the centroid of an empty mask")
    return float(xs.mean()), float(ys.mean())


def luminance_threshold(image, masks: MaskSet) -> float:
    """Midpoint between the mean pupil and mean iris luminance."""
    image = check_gray_image(image)
    if not masks.pupil.any() or not masks.iris.any():
        raise EmptyMaskError("luminance prior needs non-empty pupil and iris masks")
    c_pupil = float(image[masks.pupil].mean())
    c_iris = float(image[masks.iris].mean())
    return (c_pupil + c_iris) / 2.0


def prior_filter(labels, image, threshold: float) -> np.ndarray:
    """Drop label-map pixels that contradict the luminance prior.

    Pupil pixels strictly brighter than the threshold and iris pixels
    strictly darker than it flip to Ignore. Returns a new label map.
    """
    from . import labels as L

    image = check_gray_image(image, shape=np.asarray(labels).shape)
    out = np.array(labels, dtype=np.uint8, copy=True)
    out[(out == L.PUPIL) & (image > threshold)] = L.IGNORE
    out[(out == L.IRIS) & (image < threshold)] = L.IGNORE
    return out


def _trim_segment(values: np.ndarray, a: float, threshold: float) -> float | None:
    """New pupil-span end after prior pruning, or None if unchanged.

    Scans the span up to PRIOR_EDGE_MARGIN samples short of its end for
    the first run of PRIOR_RUN consecutive samples brighter than the
    threshold; the span is cut at the run start. A cut at the origin
    empties the span (returned as 0.0, demoting the ray).
    """
    end = int(math.floor(a))
    span = values[: max(0, end + 1 - PRIOR_EDGE_MARGIN)]
    bright = span > threshold
    run = 0
    for t, flag in enumerate(bright):
        run = run + 1 if flag else 0
        if run >= PRIOR_RUN:
            return float(t - PRIOR_RUN + 1)
    return None


def apply_prior_to_indications(
    indications: PupilIrisIndications, image, threshold: float
) -> tuple[PupilIrisIndications, bool]:
    """Prune radial indications against the luminance prior.

    The label map drops contradicting pixels outright. Each labeled ray's
    pupil span is cut at the first sustained bright run; a cut to zero
    demotes the ray. Returns the pruned indications and whether any ray
    changed.
    """
    image = check_gray_image(image, shape=indications.labels.shape)
    fan = indications.fan
    sampled = fan.sample_values(image)
    changed = False
    new_segments = []
    for seg in indications.segments:
        if not seg.labeled:
            new_segments.append(seg)
            continue
        new_a = _trim_segment(sampled[seg.ray_index], seg.a, threshold)
        if new_a is None:
            new_segments.append(seg)
            continue
        changed = True
        if new_a <= 0.0:
            new_segments.append(dataclasses.replace(seg, labeled=False))
        else:
            new_segments.append(dataclasses.replace(seg, a=new_a))
    labels = prior_filter(indications.labels, image, threshold)
    pruned = PupilIrisIndications(
        labels=labels,
        segments=tuple(new_segments),
        fan=fan,
        params=indications.params,
    )
    return pruned, changed


@dataclass
class _ImageState:
    origin: tuple[float, float]
    pupil: EllipseParams
    iris: EllipseParams
    eye_mask: np.ndarray | None = None


def _bootstrap(image, pii_params: PupilIrisParams) -> _ImageState:
    origin = locate_pupil_point(image)
    indications = generate_pupil_iris_indications(image, origin, pii_params)
    pupil_e, iris_e = densify_pupil_iris(indications)
    return _ImageState(origin=(float(origin[0]), float(origin[1])),
                       pupil=pupil_e, iris=iris_e)


def _refresh_radial(image, state: _ImageState, masks: MaskSet,
                    pii_params: PupilIrisParams, use_prior: bool) -> _ImageState:
    try:
        new_origin = pupil_center(masks.pupil)
    except EmptyMaskError:
        located = locate_pupil_point(image)
        new_origin = (float(located[0]), float(located[1]))

    indications = generate_pupil_iris_indications(image, new_origin, pii_params)
    trimmed = False
    if use_prior:
        try:
            threshold = luminance_threshold(image, masks)
        except EmptyMaskError:
            threshold = None
        if threshold is not None:
            indications, trimmed = apply_prior_to_indications(
                indications, image, threshold
            )

    drift = math.hypot(new_origin[0] - state.origin[0],
                       new_origin[1] - state.origin[1])
    if drift <= CONVERGENCE_DRIFT and not trimmed:
        return state
    try:
        pupil_e, iris_e = densify_pupil_iris(indications)
    except FitError:
        return state
    return dataclasses.replace(state, origin=new_origin, pupil=pupil_e, iris=iris_e)


def _refresh_eye(image, state: _ImageState, smooth_map,
                 ei_params: EyeRegionParams, oracle, n_rays: int,
                 seed: int, image_id: str) -> tuple[np.ndarray | None, bool]:
    """Rebuild the eye mask; returns (mask, oracle_fell_back)."""
    shape = image.shape
    region = rasterize_ellipse(state.iris, shape) | rasterize_ellipse(state.pupil, shape)
    if not region.any():
        return state.eye_mask, False
    fan = RayFan(state.origin, shape, n_rays=n_rays)
    try:
        initial = initial_eye_indication(smooth_map, region, fan, ei_params)
    except ValueError:
        return state.eye_mask, False
    indications = initial
    fell_back = False
    if oracle is not None:
        try:
            indications = refine_eye_indications(
                image, initial, oracle, ei_params, seed=seed, image_id=image_id
            )
        except OracleTransportError:
            # Oracle unreachable after its own retries: continue on the
            # smoothness-only indications rather than dropping the image.
            indications = initial
            fell_back = True
    try:
        return eye_mask_from_indications(indications), fell_back
    except FitError:
        return state.eye_mask, fell_back


def run_single_image(image, image_id: str, schedule: Schedule,
                     oracle=None,
                     pii_params: PupilIrisParams | None = None,
                     ei_params: EyeRegionParams | None = None,
                     seed: int = 0, use_prior_filter: bool = True,
                     history: list | None = None,
                     fallback_rounds: list | None = None) -> MaskSet:
    """Run all rounds on one image; returns the final mask set.

    ``history``, when given, collects a MaskSet copy after every round;
    ``fallback_rounds`` collects rounds where an unreachable oracle forced
    smoothness-only refinement. Raises an EyemarkError subclass when
    segmentation cannot proceed.
    """
    image = check_gray_image(image)
    pii_params = pii_params or PupilIrisParams()
    ei_params = ei_params or EyeRegionParams()

    state = _bootstrap(image, pii_params)
    masks = masks_from_ellipses(state.pupil, state.iris, None, image.shape)
    if history is not None:
        history.append(masks.copy())

    smooth = None
    eye_rounds = set(schedule.eye_rounds)
    for round_index in range(1, schedule.total_rounds):
        state = _refresh_radial(image, state, masks, pii_params, use_prior_filter)
        if round_index in eye_rounds:
            if smooth is None:
                smooth = gstd_map(image, ei_params)
            state.eye_mask, fell_back = _refresh_eye(
                image, state, smooth, ei_params, oracle,
                n_rays=pii_params.n_rays,
                seed=derive_seed(seed, image_id, round_index),
                image_id=image_id,
            )
            if fell_back and fallback_rounds is not None:
                fallback_rounds.append(round_index)
        masks = masks_from_ellipses(state.pupil, state.iris, state.eye_mask, image.shape)
        if history is not None:
            history.append(masks.copy())
    return masks


def run_progressive_pipeline(images: dict, schedule: Schedule | None = None,
                             oracle=None,
                             pii_params: PupilIrisParams | None = None,
                             ei_params: EyeRegionParams | None = None,
                             seed: int = 0, use_prior_filter: bool = True,
                             keep_history: bool = False) -> PipelineResult:
    """Segment a corpus of grayscale images.

    ``images`` maps image id to a 2-D array. Per-image failures are
    recorded, not raised; the failed id maps to None in the result.
    """
    schedule = schedule or Schedule()
    masks: dict = {}
    failures: dict = {}
    fallbacks: dict = {}
    history: dict | None = {} if keep_history else None
    for image_id in sorted(images):
        image = images[image_id]
        rounds: list | None = [] if keep_history else None
        fell_back: list = []
        try:
            masks[image_id] = run_single_image(
                image, image_id, schedule, oracle=oracle,
                pii_params=pii_params, ei_params=ei_params,
                seed=seed, use_prior_filter=use_prior_filter,
                history=rounds, fallback_rounds=fell_back,
            )
        except EyemarkError as exc:
            masks[image_id] = None
            failures[image_id] = f"{type(exc).__name__}: {exc}"
        if fell_back:
            fallbacks[image_id] = fell_back
        if history is not None:
            history[image_id] = rounds or []
    return PipelineResult(masks=masks, failures=failures,
                          schedule=schedule, history=history,
                          oracle_fallbacks=fallbacks)
