"""Base64 PNG payloads to and from numpy arrays."""

from __future__ import annotations

import base64
import binascii
import io

import numpy as np
from PIL import Image, UnidentifiedImageError


class PayloadError(ValueError):
    """The request carried bytes that do not decode to an image."""


def decode_image(payload: str) -> np.ndarray:
    """Base64 PNG to a 2-D uint8 array; color inputs are averaged."""
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise PayloadError(f"image is not valid base64: {exc}") from exc
    try:
        with Image.open(io.BytesIO(raw)) as img:
            img.load()
            if img.mode in ("L", "P"):
                arr = np.asarray(img.convert("L"))
            else:
                arr = np.asarray(img.convert("RGB")).mean(axis=2)
    except UnidentifiedImageError as exc:
        raise PayloadError("image bytes are not a decodable image") from exc
    return np.asarray(arr, dtype=np.uint8)


def encode_mask(mask: np.ndarray) -> str:
    """Boolean mask to a base64 single-channel PNG with values 0 and 255."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
