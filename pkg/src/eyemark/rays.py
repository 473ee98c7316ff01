"""Radial ray fan shared by the indication stages.

A fan is anchored at a (possibly fractional) origin inside the image and
casts N equally spaced rays. Samples sit at unit steps along each ray
(sample index == distance from the origin) and are looked up at the
nearest pixel, with no interpolation. A ray ends at the last sample whose
nearest pixel is still inside the image.
"""

from __future__ import annotations

import numpy as np

from .validation import check_point_inside


class RayFan:
    """Precomputed sample geometry for N rays from a common origin.

    Attributes:
        origin: (x, y) float anchor point.
        n_rays: number of rays (1-degree spacing at the default 360).
        px, py: (n_rays, t_max) int arrays of nearest-pixel sample coords.
        lengths: per-ray sample counts T_i; samples t in [0, T_i) are valid.
    """

    def __init__(self, origin, shape, n_rays: int = 360):
        if n_rays < 1:
            raise ValueError(f"n_rays must be >= 1, got {n_rays}")
        h, w = shape[:2]
        ox, oy = check_point_inside(origin, (h, w), name="origin")
        self.origin = (ox, oy)
        self.shape = (h, w)
        self.n_rays = int(n_rays)

        self.angles = 2.0 * np.pi * np.arange(self.n_rays) / self.n_rays
        self.directions = np.stack(
            [np.cos(self.angles), np.sin(self.angles)], axis=1
        )

        t_max = int(np.ceil(np.hypot(w, h))) + 1
        ts = np.arange(t_max, dtype=np.float64)
        xs = ox + self.directions[:, 0:1] * ts[None, :]
        ys = oy + self.directions[:, 1:2] * ts[None, :]
        px = np.rint(xs).astype(np.int64)
        py = np.rint(ys).astype(np.int64)
        inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)

        # A ray stops at its first out-of-image sample.
        ever_out = ~inside.all(axis=1)
        first_out = np.where(ever_out, inside.argmin(axis=1), t_max)
        self.lengths = first_out.astype(np.int64)
        self.t_max = t_max
        valid = ts[None, :] < self.lengths[:, None]
        self.px = np.where(valid, px, 0)
        self.py = np.where(valid, py, 0)
        self.valid = valid

    def sample_values(self, values) -> np.ndarray:
        """Nearest-pixel lookups along every ray.

        Returns an (n_rays, t_max) float array; entries beyond a ray's
        length are zero.
        """
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != self.shape:
            raise ValueError(f"values shape {arr.shape} != fan shape {self.shape}")
        out = arr[self.py, self.px]
        out[~self.valid] = 0.0
        return out

    def sample_flags(self, flags) -> np.ndarray:
        """Nearest-pixel boolean lookups; False beyond each ray's length."""
        arr = np.asarray(flags).astype(bool)
        if arr.shape != self.shape:
            raise ValueError(f"flags shape {arr.shape} != fan shape {self.shape}")
        out = arr[self.py, self.px]
        out[~self.valid] = False
        return out

    def ray_pixels(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) pixel coordinate arrays of one ray's valid samples."""
        n = self.lengths[index]
        return self.px[index, :n], self.py[index, :n]

    def point_at(self, index: int, distance: float) -> tuple[float, float]:
        """Exact (sub-pixel) position at a given distance along a ray."""
        dx, dy = self.directions[index]
        return (self.origin[0] + distance * dx, self.origin[1] + distance * dy)
