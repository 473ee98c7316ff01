"""Sparse pupil/iris indications from radially consistent gradients.

Stages, all anchored at a point inside the pupil:

1. keep only gradients whose surrounding window votes strongly for the
   outward radial direction (a local consensus filter);
2. walk rays outward, widen the surviving gradient magnitudes with a short
   rectangular pulse, and read off the first two non-zero runs as the
   pupil and iris boundary crossings;
3. demote rays whose pupil-to-iris segment length deviates from the fan's
   mean by more than one standard deviation;
4. rasterize the surviving rays into a label map.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import labels as L
from .imaging import sobel_gradients, window_counts, windowed_sums
from .rays import RayFan
from .validation import (
    check_gradient_field,
    check_gray_image,
    check_point_inside,
    check_window_side,
)

RUN_FLOOR = 1e-6  # values above this count as non-zero when finding runs


@dataclass(frozen=True)
class PupilIrisParams:
    """Knobs for the pupil/iris indication stage."""

    window_side: int = 10          # consensus window side, pixels
    agreement: float = 0.8         # window vote fraction that must agree
    pulse_width: int = 3           # rectangular pulse width, samples
    n_rays: int = 360

    def __post_init__(self):
        check_window_side(self.window_side, "window_side")
        if not (0.0 < self.agreement < 1.0):
            raise ValueError(f"agreement must be in (0, 1), got {self.agreement}")
        if self.pulse_width < 1:
            raise ValueError(f"pulse_width must be >= 1, got {self.pulse_width}")
        if self.n_rays < 1:
            raise ValueError(f"n_rays must be >= 1, got {self.n_rays}")


@dataclass(frozen=True)
class RaySegments:
    """Boundary geometry of one ray.

    ``a`` and ``b`` are distances (sample indices) of the pupil and iris
    boundary crossings: pupil samples are t < a, iris samples a <= t < b,
    background samples t > b. ``labeled`` is False when the ray was ignored.
    """

    ray_index: int
    labeled: bool
    a: float = 0.0
    b: float = 0.0

    @property
    def iris_length(self) -> float:
        return self.b - self.a


@dataclass
class PupilIrisIndications:
    """Result bundle: the label map plus the per-ray geometry behind it."""

    labels: np.ndarray
    segments: list[RaySegments]
    fan: RayFan
    params: PupilIrisParams = field(default_factory=PupilIrisParams)

    @property
    def retained(self) -> list[RaySegments]:
        return [s for s in self.segments if s.labeled]


def outward_satisfaction(field, origin) -> np.ndarray:
    """Boolean map: gradient points strictly outward from the origin.

    True where g . (p - origin) > 0 and g != 0. The origin's own pixel has
    a zero offset vector and is never satisfied.
    """
    f = check_gradient_field(field)
    h, w = f.shape[:2]
    ox, oy = check_point_inside(origin, (h, w), name="origin")
    ys, xs = np.mgrid[0:h, 0:w]
    vx = xs - ox
    vy = ys - oy
    dot = f[..., 0] * vx + f[..., 1] * vy
    nonzero = (f[..., 0] != 0) | (f[..., 1] != 0)
    return (dot > 0) & nonzero


def filter_radial_gradients(field, origin, params: PupilIrisParams | None = None) -> np.ndarray:
    """Zero out gradients without strong local outward consensus.

    A gradient survives iff the fraction of its clipped window's pixels
    whose own gradient points outward from the origin exceeds the
    agreement threshold. The origin pixel itself is always zeroed.
    """
    params = params or PupilIrisParams()
    f = check_gradient_field(field)
    sat = outward_satisfaction(f, origin)
    counts = window_counts(f.shape[:2], params.window_side)
    votes = windowed_sums(sat, params.window_side)
    keep = votes / counts > params.agreement
    out = np.where(keep[..., None], f, 0.0)
    ox, oy = int(round(origin[0])), int(round(origin[1]))
    out[oy, ox] = 0.0
    return out


def pulse_offsets(width: int) -> np.ndarray:
    """Support of the rectangular pulse: symmetric for odd widths, one
    extra tap on the positive side for even widths."""
    if width < 1:
        raise ValueError(f"pulse width must be >= 1, got {width}")
    if width % 2:
        half = (width - 1) // 2
        return np.arange(-half, half + 1)
    return np.arange(-width // 2 + 1, width // 2 + 1)


def convolve_ray_pulse(values, width: int) -> np.ndarray:
    """Correlate a 1-D non-negative sequence with a unit rectangular pulse.

    Out-of-range samples are treated as zero, so the output has the input's
    length. A single non-zero sample widens into ``width`` samples.
    """
    seq = np.asarray(values, dtype=np.float64)
    if seq.ndim != 1:
        raise ValueError("expected a 1-D sequence")
    if seq.size == 0:
        return seq.copy()
    full = np.convolve(seq, np.ones(int(width), dtype=np.float64), mode="full")
    # Align so the support matches pulse_offsets: for even widths the extra
    # tap sits on the positive side.
    start = int(width) // 2
    return full[start : start + seq.size]


def find_runs(values, floor: float = RUN_FLOOR) -> list[tuple[int, int]]:
    """Maximal runs of samples above the floor, as inclusive (start, end)."""
    seq = np.asarray(values, dtype=np.float64)
    above = np.concatenate([[False], seq > floor, [False]])
    diff = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def extract_ray_segments(values, ray_index: int = 0) -> RaySegments:
    """Locate the pupil and iris boundary crossings on one ray.

    The first two non-zero runs of the pulse-widened magnitudes mark the
    pupil and iris boundaries; each crossing sits at its run's midpoint.
    Rays with fewer than two runs are ignored.
    """
    runs = find_runs(values)
    if len(runs) < 2:
        return RaySegments(ray_index=ray_index, labeled=False)
    a = (runs[0][0] + runs[0][1]) / 2.0
    b = (runs[1][0] + runs[1][1]) / 2.0
    if not (0 < a < b):
        return RaySegments(ray_index=ray_index, labeled=False)
    return RaySegments(ray_index=ray_index, labeled=True, a=a, b=b)


def statistical_ray_filter(segments: list[RaySegments]) -> list[RaySegments]:
    """Demote rays whose iris-segment length is a statistical outlier.

    Uses the population statistics of the labeled rays' lengths; a ray is
    kept iff |l_i - mean| <= std. Fewer than two labeled rays leaves
    nothing to compare against, so all rays are demoted.
    """
    labeled = [s for s in segments if s.labeled]
    if len(labeled) < 2:
        return [replace(s, labeled=False) if s.labeled else s for s in segments]
    lengths = np.array([s.iris_length for s in labeled], dtype=np.float64)
    mean = lengths.mean()
    std = lengths.std()  # population form
    out = []
    for s in segments:
        if s.labeled and abs(s.iris_length - mean) > std:
            out.append(replace(s, labeled=False))
        else:
            out.append(s)
    return out


def rasterize_segments(segments: list[RaySegments], fan: RayFan) -> np.ndarray:
    """Paint retained rays' spans onto a label map.

    Outer labels are written first (background, then iris, then pupil), so
    pixels shared by neighboring rays near the origin deterministically
    keep the innermost claim regardless of ray order.
    """
    labels = np.zeros(fan.shape, dtype=np.uint8)
    buckets = {L.BACKGROUND: ([], []), L.IRIS: ([], []), L.PUPIL: ([], [])}
    for seg in segments:
        if not seg.labeled:
            continue
        n = fan.lengths[seg.ray_index]
        ts = np.arange(n)
        xs = fan.px[seg.ray_index, :n]
        ys = fan.py[seg.ray_index, :n]
        pupil = ts < seg.a
        iris = (ts >= seg.a) & (ts < seg.b)
        back = ts > seg.b
        for label, sel in ((L.BACKGROUND, back), (L.IRIS, iris), (L.PUPIL, pupil)):
            buckets[label][0].append(xs[sel])
            buckets[label][1].append(ys[sel])
    for label in (L.BACKGROUND, L.IRIS, L.PUPIL):
        xs_list, ys_list = buckets[label]
        if xs_list:
            labels[np.concatenate(ys_list), np.concatenate(xs_list)] = label
    return labels


def generate_pupil_iris_indications(
    image,
    origin,
    params: PupilIrisParams | None = None,
    fan: RayFan | None = None,
) -> PupilIrisIndications:
    """Full pupil/iris indication pass for one image.

    Args:
        image: luminance array.
        origin: (x, y) point inside the pupil.
        params: stage parameters (library defaults when omitted).
        fan: optional prebuilt ray fan (must match image shape and origin).

    Returns:
        PupilIrisIndications with the label map, per-ray geometry, and fan.
    """
    img = check_gray_image(image)
    params = params or PupilIrisParams()
    check_point_inside(origin, img.shape, name="origin")
    if fan is None:
        fan = RayFan(origin, img.shape, n_rays=params.n_rays)
    field = sobel_gradients(img)
    filtered = filter_radial_gradients(field, origin, params)
    mags = np.hypot(filtered[..., 0], filtered[..., 1])
    samples = fan.sample_values(mags)

    segments = []
    for i in range(fan.n_rays):
        vals = convolve_ray_pulse(samples[i, : fan.lengths[i]], params.pulse_width)
        segments.append(extract_ray_segments(vals, ray_index=i))
    segments = statistical_ray_filter(segments)

    labels = rasterize_segments(segments, fan)
    return PupilIrisIndications(labels=labels, segments=segments, fan=fan, params=params)
