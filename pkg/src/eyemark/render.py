"""Synthetic near-infrared eye scenes with exact ground truth.

A scene is a dark pupil ellipse inside a darker-than-sclera iris ellipse,
framed by two eyelid parabolas (the upper curve opens upward, the lower
downward, so the visible region is their convex lens). Luminance is flat
per region, optionally softened by a Gaussian before seeded noise is
added, and ground-truth masks always come from the sharp geometry with
the visible-part convention (iris mask is the annulus inside the lids).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io as eio
from .densify import EllipseParams, MaskSet, rasterize_ellipse

MIN_LEVEL_GAP = 20.0

PROFILES = ("clean", "occluded", "noisy")


@dataclass(frozen=True)
class EyeSceneSpec:
    """Complete recipe for one rendered eye image."""

    seed: int
    width: int
    height: int
    pupil: EllipseParams
    iris: EllipseParams
    eye_center: tuple[float, float]
    eye_half_width: float
    upper_offset: float   # upper-lid apex height above eye center
    lower_offset: float   # lower-lid apex depth below eye center
    levels: tuple[float, float, float, float]  # pupil, iris, sclera, skin
    glints: tuple[tuple[float, float, float], ...] = ()  # (x, y, radius)
    noise_sigma: float = 0.0
    edge_softness: float = 0.0  # Gaussian sigma applied before noise

    def __post_init__(self):
        p, i, s, _ = self.levels
        if not (p + MIN_LEVEL_GAP <= i and i + MIN_LEVEL_GAP <= s):
            raise ValueError(
                f"levels must rise pupil < iris < sclera by >= {MIN_LEVEL_GAP}, got {self.levels}"
            )
        if self.noise_sigma < 0 or self.edge_softness < 0:
            raise ValueError("noise_sigma and edge_softness must be >= 0")
        if not _ellipse_inside(self.pupil, self.iris):
            raise ValueError("pupil ellipse must lie strictly inside the iris ellipse")


def _ellipse_inside(inner: EllipseParams, outer: EllipseParams, n: int = 64) -> bool:
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    c, s = np.cos(inner.rotation), np.sin(inner.rotation)
    bx = inner.center[0] + inner.semi_major * np.cos(t) * c - inner.semi_minor * np.sin(t) * s
    by = inner.center[1] + inner.semi_major * np.cos(t) * s + inner.semi_minor * np.sin(t) * c
    return bool(outer.contains(bx, by).all())


def eyelid_region(spec: EyeSceneSpec) -> np.ndarray:
    """Pixels between the two lid parabolas (the visible eye region)."""
    h, w = spec.height, spec.width
    cx, cy = spec.eye_center
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xr = (xs - cx) / spec.eye_half_width
    open_x = np.abs(xr) <= 1.0
    upper = cy - spec.upper_offset * (1.0 - xr * xr)
    lower = cy + spec.lower_offset * (1.0 - xr * xr)
    return open_x & (ys >= upper) & (ys <= lower)


def render_eye(spec: EyeSceneSpec) -> tuple[np.ndarray, MaskSet]:
    """Render a scene; returns (image, ground-truth masks).

    The image is quantized to 8-bit levels stored as float64. Rendering is
    deterministic per spec: the same spec yields byte-identical pixels.
    """
    h, w = spec.height, spec.width
    eye = eyelid_region(spec)
    iris_r = rasterize_ellipse(spec.iris, (h, w))
    pupil_r = rasterize_ellipse(spec.pupil, (h, w))

    p_lum, i_lum, s_lum, skin_lum = spec.levels
    img = np.full((h, w), skin_lum, dtype=np.float64)
    img[eye] = s_lum
    img[iris_r & eye] = i_lum
    img[pupil_r & eye] = p_lum
    for gx, gy, gr in spec.glints:
        ys, xs = np.mgrid[0:h, 0:w]
        disc = (xs - gx) ** 2 + (ys - gy) ** 2 <= gr * gr
        img[disc & eye] = 255.0

    if spec.edge_softness > 0:
        img = ndimage.gaussian_filter(img, spec.edge_softness, mode="nearest")
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    img = np.clip(np.rint(img), 0, 255)

    pupil_vis = pupil_r & eye
    iris_vis = iris_r & eye & ~pupil_vis
    return img, MaskSet(pupil=pupil_vis, iris=iris_vis, eye=eye)


def _iris_clip_fraction(spec: EyeSceneSpec) -> float:
    iris_r = rasterize_ellipse(spec.iris, (spec.height, spec.width))
    total = int(np.count_nonzero(iris_r))
    if total == 0:
        return 0.0
    visible = int(np.count_nonzero(iris_r & eyelid_region(spec)))
    return 1.0 - visible / total


def sample_scene(profile: str, rng: np.random.Generator,
                 width: int = 320, height: int = 240) -> EyeSceneSpec:
    """Draw one scene spec for a corpus profile.

    Profiles: ``clean`` (mild jitter, lids clear of the iris, light noise),
    ``occluded`` (upper lid covers 10..40% of the iris), ``noisy``
    (clean geometry, noise sigma up to 12).
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}, expected one of {PROFILES}")

    cx = width / 2.0 + rng.uniform(-8, 8)
    cy = height / 2.0 + rng.uniform(-6, 6)
    iris_a = rng.uniform(0.155, 0.175) * width
    iris_b = iris_a * rng.uniform(0.90, 0.98)
    iris_rot = rng.uniform(-0.15, 0.15) % np.pi
    iris = EllipseParams((cx, cy), iris_a, iris_b, iris_rot)

    pupil_a = iris_a * rng.uniform(0.28, 0.36)
    pupil_b = pupil_a * rng.uniform(0.85, 0.98)
    pcx = cx + rng.uniform(-3, 3)
    pcy = cy + rng.uniform(-3, 3)
    pupil = EllipseParams((pcx, pcy), pupil_a, pupil_b, rng.uniform(0, np.pi))

    levels = (
        rng.uniform(15, 30),
        rng.uniform(80, 110),
        rng.uniform(165, 195),
        rng.uniform(125, 150),
    )
    eye_half_width = rng.uniform(0.30, 0.34) * width
    vertical_reach = iris_b + abs(pcy - cy) + 2.0
    lower_offset = vertical_reach + rng.uniform(4, 14)

    n_glints = int(rng.integers(0, 3))
    glints = []
    for _ in range(n_glints):
        ang = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(pupil_a + 5, iris_a - 7)
        glints.append(
            (cx + dist * np.cos(ang), cy + dist * np.sin(ang), rng.uniform(2.0, 4.0))
        )

    if profile == "noisy":
        noise_sigma = rng.uniform(6.0, 12.0)
    else:
        noise_sigma = rng.uniform(1.0, 2.0)
    edge_softness = rng.uniform(1.6, 2.2)
    seed = int(rng.integers(2**31))

    base = EyeSceneSpec(
        seed=seed,
        width=width,
        height=height,
        pupil=pupil,
        iris=iris,
        eye_center=(cx, cy),
        eye_half_width=eye_half_width,
        upper_offset=vertical_reach + rng.uniform(6, 16),
        lower_offset=lower_offset,
        levels=levels,
        glints=tuple(glints),
        noise_sigma=noise_sigma,
        edge_softness=edge_softness,
    )
    if profile != "occluded":
        return base

    # Bisect the upper-lid apex until it clips the target share of the iris.
    target = rng.uniform(0.12, 0.38)
    lo, hi = 0.15 * iris_b, vertical_reach + 4.0
    for _ in range(18):
        mid = (lo + hi) / 2.0
        clip = _iris_clip_fraction(replace(base, upper_offset=mid))
        if clip > target:
            lo = mid
        else:
            hi = mid
    return replace(base, upper_offset=(lo + hi) / 2.0)


def generate_corpus(profile: str, count: int, seed: int,
                    width: int = 320, height: int = 240) -> list:
    """Deterministic list of (image_id, scene spec) for a profile."""
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        out.append((f"{i:04d}", sample_scene(profile, rng, width, height)))
    return out


def scene_to_text(spec: EyeSceneSpec) -> str:
    """Flatten a scene spec to ``key = value`` lines."""
    rows = {
        "seed": spec.seed,
        "width": spec.width,
        "height": spec.height,
        "pupil": _ellipse_text(spec.pupil),
        "iris": _ellipse_text(spec.iris),
        "eye_center": f"{spec.eye_center[0]:.4f},{spec.eye_center[1]:.4f}",
        "eye_half_width": f"{spec.eye_half_width:.4f}",
        "upper_offset": f"{spec.upper_offset:.4f}",
        "lower_offset": f"{spec.lower_offset:.4f}",
        "levels": ",".join(f"{v:.4f}" for v in spec.levels),
        "glints": ";".join(f"{x:.3f},{y:.3f},{r:.3f}" for x, y, r in spec.glints),
        "noise_sigma": f"{spec.noise_sigma:.4f}",
        "edge_softness": f"{spec.edge_softness:.4f}",
    }
    return "\n".join(f"{k} = {v}" for k, v in rows.items()) + "\n"


def _ellipse_text(e: EllipseParams) -> str:
    return (f"{e.center[0]:.4f},{e.center[1]:.4f},"
            f"{e.semi_major:.4f},{e.semi_minor:.4f},{e.rotation:.6f}")


def _ellipse_from_text(text: str) -> EllipseParams:
    cx, cy, a, b, rot = (float(v) for v in text.split(","))
    return EllipseParams((cx, cy), a, b, rot)


def scene_from_text(text: str) -> EyeSceneSpec:
    kv = eio.parse_keyvalue_text(text)
    glints = tuple(
        tuple(float(v) for v in part.split(","))
        for part in kv.get("glints", "").split(";")
        if part
    )
    return EyeSceneSpec(
        seed=int(kv["seed"]),
        width=int(kv["width"]),
        height=int(kv["height"]),
        pupil=_ellipse_from_text(kv["pupil"]),
        iris=_ellipse_from_text(kv["iris"]),
        eye_center=tuple(float(v) for v in kv["eye_center"].split(",")),
        eye_half_width=float(kv["eye_half_width"]),
        upper_offset=float(kv["upper_offset"]),
        lower_offset=float(kv["lower_offset"]),
        levels=tuple(float(v) for v in kv["levels"].split(",")),
        glints=glints,
        noise_sigma=float(kv["noise_sigma"]),
        edge_softness=float(kv["edge_softness"]),
    )


def write_corpus(directory, profile: str, count: int, seed: int,
                 width: int = 320, height: int = 240) -> list[str]:
    """Render a corpus to ``images/``, ``masks/``, and ``spec/``; returns ids."""
    directory = Path(directory)
    ids = []
    for image_id, spec in generate_corpus(profile, count, seed, width, height):
        image, gt = render_eye(spec)
        eio.write_gray(directory / "images" / f"{image_id}.png", image)
        eio.write_mask_png(directory / "masks" / f"{image_id}.png", gt)
        eio.atomic_write_text(directory / "spec" / image_id, scene_to_text(spec))
        ids.append(image_id)
    return ids


def read_corpus(directory) -> tuple[dict, dict]:
    """Load a corpus directory; returns (images, gt_masks) keyed by id.

    ``masks/`` is optional (evaluation-only); images must exist.
    """
    directory = Path(directory)
    image_dir = directory / "images"
    if not image_dir.is_dir():
        raise FileNotFoundError(f"corpus has no images/ directory: {directory}")
    images = {}
    for path in sorted(image_dir.glob("*.png")):
        images[path.stem] = eio.read_gray(path)
    if not images:
        raise FileNotFoundError(f"corpus images/ is empty: {directory}")
    masks = {}
    mask_dir = directory / "masks"
    if mask_dir.is_dir():
        for path in sorted(mask_dir.glob("*.png")):
            masks[path.stem] = eio.read_mask_png(path)
    return images, masks
