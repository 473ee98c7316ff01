"""Label constants and palette contracts for indication and mask images.

Palette indices are the file-format contract; the colors are only for
human inspection and may coincide.
"""

import numpy as np

# Indication-map labels. These double as palette indices in indication PNGs.
IGNORE = 0
PUPIL = 1
IRIS = 2
BACKGROUND = 3
EYE_FG = 4
EYE_BG = 5

INDICATION_LABELS = (IGNORE, PUPIL, IRIS, BACKGROUND, EYE_FG, EYE_BG)

LABEL_NAMES = {
    IGNORE: "ignore",
    PUPIL: "pupil",
    IRIS: "iris",
    BACKGROUND: "background",
    EYE_FG: "eye_fg",
    EYE_BG: "eye_bg",
}

# index -> RGB for indication PNGs
INDICATION_PALETTE = {
    IGNORE: (0, 0, 0),
    PUPIL: (220, 40, 40),         # red
    IRIS: (30, 30, 160),          # dark blue
    BACKGROUND: (120, 190, 230),  # light blue
    EYE_FG: (60, 200, 80),        # green
    EYE_BG: (120, 190, 230),      # light blue (index distinguishes it)
}

# Mask-set palette indices for combined mask PNGs.
MASK_BACKGROUND = 0
MASK_PUPIL = 1
MASK_IRIS = 2
MASK_EYE_REST = 3  # eye region excluding iris and pupil

MASK_PALETTE = {
    MASK_BACKGROUND: (0, 0, 0),
    MASK_PUPIL: (220, 40, 40),
    MASK_IRIS: (30, 30, 160),
    MASK_EYE_REST: (60, 200, 80),
}


def palette_bytes(palette: dict) -> bytes:
    """Flatten an index->RGB dict into the 768-byte PNG palette."""
    flat = np.zeros((256, 3), dtype=np.uint8)
    for idx, rgb in palette.items():
        flat[idx] = rgb
    return flat.tobytes()
