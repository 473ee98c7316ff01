"""File formats: grayscale images, indication PNGs with sidecars, mask PNGs.

All writers are atomic (temp file in the target directory, then rename),
so a crashed run never leaves a half-written file behind.
"""

from __future__ import annotations

import os
import tempfile
import warnings
from pathlib import Path

import numpy as np
from PIL import Image

from . import labels as L
from .validation import check_gray_image, check_mask

INDICATION_SIDECAR_SUFFIX = ".meta"


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _png_bytes(img: Image.Image, **kwargs) -> bytes:
    import io as _io

    buf = _io.BytesIO()
    img.save(buf, format="PNG", **kwargs)
    return buf.getvalue()


def read_gray(path) -> np.ndarray:
    """Read a PNG or binary PGM as float64 luminance in [0, 255].

    Multi-channel images are collapsed by averaging the channels, with a
    warning; 16-bit inputs are rescaled onto [0, 255].
    """
    with Image.open(path) as im:
        im.load()
        if im.mode in ("L", "P"):
            if im.mode == "P":
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.float64)
        elif im.mode in ("I", "I;16", "I;16B"):
            arr = np.asarray(im, dtype=np.float64)
            top = arr.max()
            if top > 255:
                arr = arr * (255.0 / 65535.0)
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            warnings.warn(
                f"{path}: multi-channel image collapsed by channel average",
                stacklevel=2,
            )
            arr = rgb.mean(axis=2)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image")
    return arr


def write_gray(path, image) -> None:
    """Write a luminance array as an 8-bit grayscale PNG."""
    img = check_gray_image(image)
    data = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    _atomic_write_bytes(path, _png_bytes(Image.fromarray(data, mode="L")))


def _write_indexed(path, indices: np.ndarray, palette: dict) -> None:
    img = Image.fromarray(indices.astype(np.uint8), mode="P")
    img.putpalette(L.palette_bytes(palette))
    _atomic_write_bytes(path, _png_bytes(img))


def _read_indexed(path) -> np.ndarray:
    with Image.open(path) as im:
        im.load()
        if im.mode != "P":
            raise ValueError(f"{path}: expected an indexed (palette) PNG")
        return np.asarray(im, dtype=np.uint8)


def write_indication_png(path, label_map, metadata: dict | None = None) -> None:
    """Write an indication map as an indexed PNG plus a plain-text sidecar.

    Palette indices are the contract: 0 ignore, 1 pupil, 2 iris,
    3 background, 4 eye foreground, 5 eye background. The sidecar
    (``<png>.meta``) carries ``key = value`` lines: the ray origin, the
    generating parameters, and per-label pixel counts.
    """
    arr = np.asarray(label_map)
    if arr.ndim != 2:
        raise ValueError("label map must be 2-D")
    bad = set(np.unique(arr)) - set(L.INDICATION_LABELS)
    if bad:
        raise ValueError(f"label map contains unknown labels {sorted(bad)}")
    _write_indexed(path, arr, L.INDICATION_PALETTE)

    meta = dict(metadata or {})
    for label in L.INDICATION_LABELS:
        meta[f"count_{L.LABEL_NAMES[label]}"] = int(np.count_nonzero(arr == label))
    lines = [f"{k} = {meta[k]}" for k in meta]
    atomic_write_text(str(path) + INDICATION_SIDECAR_SUFFIX, "\n".join(lines) + "\n")


def read_indication_png(path) -> tuple[np.ndarray, dict]:
    """Read an indication PNG and its sidecar; returns (labels, metadata)."""
    arr = _read_indexed(path)
    meta = {}
    sidecar = Path(str(path) + INDICATION_SIDECAR_SUFFIX)
    if sidecar.exists():
        meta = parse_keyvalue_text(sidecar.read_text())
    return arr, meta


def parse_keyvalue_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment. Values stay strings."""
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"not a key = value line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_mask_png(path, mask_set) -> None:
    """Write a combined mask PNG: 0 background, 1 pupil, 2 iris, 3 eye rest."""
    pupil = check_mask(mask_set.pupil, name="pupil mask")
    iris = check_mask(mask_set.iris, shape=pupil.shape, name="iris mask")
    eye = check_mask(mask_set.eye, shape=pupil.shape, name="eye mask")
    combined = np.zeros(pupil.shape, dtype=np.uint8)
    combined[eye] = L.MASK_EYE_REST
    combined[iris] = L.MASK_IRIS
    combined[pupil] = L.MASK_PUPIL
    _write_indexed(path, combined, L.MASK_PALETTE)


def read_mask_png(path):
    """Read a combined mask PNG back into a MaskSet."""
    from .densify import MaskSet

    arr = _read_indexed(path)
    pupil = arr == L.MASK_PUPIL
    iris = arr == L.MASK_IRIS
    eye = arr != L.MASK_BACKGROUND
    return MaskSet(pupil=pupil, iris=iris, eye=eye)


def read_binary_mask(path) -> np.ndarray:
    """Read a single-channel 0/255 mask PNG as a boolean array."""
    with Image.open(path) as im:
        im.load()
        arr = np.asarray(im.convert("L"))
    return arr > 127


def write_binary_mask(path, mask) -> None:
    """Write a boolean array as a single-channel 0/255 PNG."""
    m = check_mask(mask)
    data = np.where(m, 255, 0).astype(np.uint8)
    _atomic_write_bytes(path, _png_bytes(Image.fromarray(data, mode="L")))


def encode_gray_png_bytes(image) -> bytes:
    """Encode a luminance array as PNG bytes (for wire payloads)."""
    img = check_gray_image(image)
    data = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return _png_bytes(Image.fromarray(data, mode="L"))


def encode_mask_png_bytes(mask) -> bytes:
    m = check_mask(mask)
    data = np.where(m, 255, 0).astype(np.uint8)
    return _png_bytes(Image.fromarray(data, mode="L"))


def decode_png_bytes(blob: bytes) -> np.ndarray:
    """Decode PNG bytes to a 2-D uint8 array (converting to 8-bit gray)."""
    import io as _io

    with Image.open(_io.BytesIO(blob)) as im:
        im.load()
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8)


def write_overlay_png(path, image, label_map, alpha: float = 0.55) -> None:
    """Blend indication colors over the grayscale image for inspection."""
    img = check_gray_image(image)
    arr = np.asarray(label_map)
    base = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    rgb = np.stack([base] * 3, axis=-1).astype(np.float64)
    for label, color in L.INDICATION_PALETTE.items():
        if label == L.IGNORE:
            continue
        sel = arr == label
        rgb[sel] = (1 - alpha) * rgb[sel] + alpha * np.asarray(color, dtype=np.float64)
    out = Image.fromarray(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), mode="RGB")
    _atomic_write_bytes(path, _png_bytes(out))
