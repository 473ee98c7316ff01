"""Promptable segmentation oracles.

One wire protocol, three adapters:

* MockPerturbedOracle: perturbs known ground-truth masks deterministically;
  the workhorse for desk-scale evaluation and tests.
* FileOracle: replays masks stored on disk, keyed by image id.
* HttpOracle: POSTs to a live segmentation service.

Wire protocol (authoritative here): ``POST /segment`` with JSON
``{"image": <base64 PNG>, "positive": [[x, y], ...], "negative": [[x, y], ...]}``
returns ``{"mask": <base64 single-channel PNG, 0 or 255>, "confidence": <number>}``.
Coordinates are integer pixels, origin top-left, x rightward, y downward.
Statuses: 200 on success, 422 for malformed prompts, 503 when the model
is not loaded.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .exceptions import OracleProtocolError, OracleTransportError
from .io import decode_png_bytes, encode_gray_png_bytes, read_binary_mask
from .validation import check_gray_image, check_mask

SEGMENT_PATH = "/segment"


@dataclass
class SegmentationRequest:
    """One prompt-segmentation call.

    ``image_id`` is local plumbing for adapters that key by image (mock,
    file); it never crosses the wire.
    """

    image: np.ndarray
    positive: list[tuple[int, int]]
    negative: list[tuple[int, int]] = field(default_factory=list)
    image_id: str | None = None

    def validate(self) -> None:
        img = check_gray_image(self.image)
        h, w = img.shape
        if len(self.positive) < 1:
            raise ValueError("at least one positive prompt is required")
        for x, y in list(self.positive) + list(self.negative):
            if not (0 <= int(x) < w and 0 <= int(y) < h):
                raise ValueError(f"prompt {(x, y)} outside {w}x{h} image")


@dataclass
class SegmentationResponse:
    mask: np.ndarray  # boolean, same shape as the request image
    confidence: float


class Oracle(Protocol):
    def segment(self, request: SegmentationRequest) -> SegmentationResponse: ...


def encode_request(request: SegmentationRequest) -> dict:
    """Request dataclass -> wire JSON object."""
    request.validate()
    return {
        "image": base64.b64encode(encode_gray_png_bytes(request.image)).decode("ascii"),
        "positive": [[int(x), int(y)] for x, y in request.positive],
        "negative": [[int(x), int(y)] for x, y in request.negative],
    }


def decode_response(payload: dict, expected_shape) -> SegmentationResponse:
    """Wire JSON object -> response dataclass, enforcing mask dimensions."""
    try:
        blob = base64.b64decode(payload["mask"])
        confidence = float(payload.get("confidence", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise OracleProtocolError(f"malformed oracle response: {exc}") from exc
    arr = decode_png_bytes(blob)
    if arr.shape != tuple(expected_shape):
        raise OracleProtocolError(
            f"oracle mask shape {arr.shape} != image shape {tuple(expected_shape)}"
        )
    return SegmentationResponse(mask=arr > 127, confidence=confidence)


def _smooth_angular_noise(rng: np.random.Generator, amplitude: float):
    """A smooth 2*pi-periodic displacement eta(theta), |eta| <= amplitude."""
    n_modes = 4
    amps = rng.uniform(0.3, 1.0, size=n_modes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    freqs = np.arange(1, n_modes + 1)
    scale = rng.uniform(0.6, 1.0) * amplitude / amps.sum()

    def eta(theta):
        theta = np.asarray(theta, dtype=np.float64)
        total = np.zeros_like(theta)
        for a, f, p in zip(amps, freqs, phases):
            total += a * np.cos(f * theta + p)
        return scale * total

    return eta


def mock_perturbed_segment(gt_mask, seed: int, amplitude: float = 8.0) -> np.ndarray:
    """Deterministically perturb a ground-truth mask.

    The boundary is displaced radially (around the mask centroid) by a
    smooth seeded angular noise bounded by ``amplitude``, then one square
    defect of side <= 2*amplitude is added or removed at a seeded boundary
    location. Amplitude 0 is the identity.
    """
    gt = check_mask(gt_mask, name="gt mask")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0 or not gt.any():
        return gt.copy()
    rng = np.random.default_rng(seed)
    h, w = gt.shape
    ys, xs = np.nonzero(gt)
    cy = ys.mean()
    cx = xs.mean()

    eta = _smooth_angular_noise(rng, amplitude)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    theta = np.arctan2(yy - cy, xx - cx)
    shift = eta(theta)
    src_x = np.clip(np.rint(xx - shift * np.cos(theta)), 0, w - 1).astype(np.int64)
    src_y = np.clip(np.rint(yy - shift * np.sin(theta)), 0, h - 1).astype(np.int64)
    warped = gt[src_y, src_x]

    # One square defect straddling the warped boundary.
    angle = rng.uniform(0.0, 2.0 * np.pi)
    side = int(rng.integers(max(1, int(amplitude)), int(2 * amplitude) + 1))
    add = bool(rng.integers(2))
    dir_x, dir_y = np.cos(angle), np.sin(angle)
    r_max = int(np.hypot(h, w))
    r_edge = None
    for r in range(r_max):
        px = int(round(cx + r * dir_x))
        py = int(round(cy + r * dir_y))
        if not (0 <= px < w and 0 <= py < h):
            break
        if warped[py, px]:
            r_edge = r
    if r_edge is not None:
        px = int(round(cx + r_edge * dir_x))
        py = int(round(cy + r_edge * dir_y))
        half = side // 2
        y0, y1 = max(0, py - half), min(h, py - half + side)
        x0, x1 = max(0, px - half), min(w, px - half + side)
        warped = warped.copy()
        warped[y0:y1, x0:x1] = add
    return warped


class MockPerturbedOracle:
    """Oracle that answers with seeded perturbations of known masks.

    Args:
        gt_masks: mapping image_id -> boolean eye mask.
        seed: base seed; each image id perturbs with its own derived seed.
        amplitude: radial displacement bound in pixels.
    """

    def __init__(self, gt_masks: dict, seed: int = 0, amplitude: float = 8.0):
        self.gt_masks = dict(gt_masks)
        self.seed = int(seed)
        self.amplitude = float(amplitude)

    def _seed_for(self, image_id: str) -> int:
        import zlib

        return (self.seed * 1_000_003 + zlib.crc32(str(image_id).encode())) % (2**63)

    def segment(self, request: SegmentationRequest) -> SegmentationResponse:
        request.validate()
        if request.image_id is None or request.image_id not in self.gt_masks:
            raise OracleProtocolError(
                f"mock oracle has no ground truth for image id {request.image_id!r}"
            )
        gt = check_mask(self.gt_masks[request.image_id],
                        shape=np.asarray(request.image).shape)
        mask = mock_perturbed_segment(gt, self._seed_for(request.image_id),
                                      self.amplitude)
        return SegmentationResponse(mask=mask, confidence=1.0)


class FileOracle:
    """Oracle that replays masks from ``<directory>/<image_id>.png``."""

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise OracleProtocolError(f"oracle mask directory missing: {directory}")

    def segment(self, request: SegmentationRequest) -> SegmentationResponse:
        request.validate()
        if request.image_id is None:
            raise OracleProtocolError("file oracle needs an image id")
        path = self.directory / f"{request.image_id}.png"
        if not path.exists():
            raise OracleProtocolError(f"no stored mask for image id {request.image_id!r}")
        mask = read_binary_mask(path)
        if mask.shape != np.asarray(request.image).shape:
            raise OracleProtocolError(
                f"stored mask shape {mask.shape} != image shape"
            )
        return SegmentationResponse(mask=mask, confidence=1.0)


class HttpOracle:
    """Oracle client for the live segmentation service.

    Transport failures (connection errors, timeouts, 5xx) are retried
    with exponential backoff and raised as OracleTransportError when the
    attempts run out; protocol violations (4xx, undecodable or misshaped
    masks) raise OracleProtocolError immediately.
    """

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 3,
                 backoff: float = 0.2):
        self.url = url.rstrip("/")
        self.timeout = float(timeout)
        self.retries = int(retries)
        self.backoff = float(backoff)

    def segment(self, request: SegmentationRequest) -> SegmentationResponse:
        import requests

        payload = encode_request(request)
        endpoint = self.url + SEGMENT_PATH
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(endpoint, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code >= 500:
                last_error = OracleTransportError(
                    f"service returned {resp.status_code}"
                )
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise OracleProtocolError(
                    f"service rejected the request: {resp.status_code} {resp.text[:200]}"
                )
            try:
                body = resp.json()
            except json.JSONDecodeError as exc:
                raise OracleProtocolError(f"non-JSON oracle response: {exc}") from exc
            return decode_response(body, np.asarray(request.image).shape)
        raise OracleTransportError(f"oracle unreachable after {self.retries} attempts: {last_error}")


def make_oracle(spec: str | None, gt_masks: dict | None = None, seed: int = 0,
                amplitude: float = 8.0):
    """Build an oracle from a CLI-style selector.

    ``mock`` needs ground-truth masks; ``file:<dir>`` replays stored masks;
    an ``http(s)://...`` URL talks to the live service. None disables
    refinement (the caller falls back to initial indications).
    """
    if spec is None or spec == "none":
        return None
    if spec == "mock":
        if gt_masks is None:
            raise ValueError("mock oracle needs ground-truth masks")
        return MockPerturbedOracle(gt_masks, seed=seed, amplitude=amplitude)
    if spec.startswith("file:"):
        return FileOracle(spec[len("file:"):])
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpOracle(spec)
    raise ValueError(f"unknown oracle selector: {spec!r}")
