from __future__ import annotations

import numpy as np
import pytest

from eyemark.imaging import (
    SOBEL_X,
    SOBEL_Y,
    adaptive_lighten,
    box_sum,
    integral_image,
    sobel_gradients,
    window_bounds,
    window_counts,
    window_fraction_satisfying,
    windowed_sums,
)


def brute_sobel(image):
    """Reference Sobel with replicate padding, pixel by pixel."""
    h, w = image.shape
    out = np.zeros((h, w, 2))
    for y in range(h):
        for x in range(w):
            gx = gy = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    gx += SOBEL_X[dy + 1][dx + 1] * image[yy, xx]
                    gy += SOBEL_Y[dy + 1][dx + 1] * image[yy, xx]
            out[y, x] = (gx, gy)
    return out


class TestSobel:
    def test_constant_image_zero_field(self):
        field = sobel_gradients(np.full((12, 9), 37.0))
        assert np.all(field == 0.0)

    def test_horizontal_ramp_interior(self):
        xs = np.arange(16, dtype=np.float64)
        image = np.tile(10.0 * xs, (10, 1))
        field = sobel_gradients(image)
        interior = field[1:-1, 1:-1]
        assert np.allclose(interior[..., 0], 80.0), "unit slope 10 weights to gx = 80"
        assert np.allclose(interior[..., 1], 0.0)

    def test_vertical_step_edge_sign(self):
        image = np.zeros((10, 20))
        image[:, 10:] = 200.0  # dark left, light right
        field = sobel_gradients(image)
        edge = field[1:-1, 9:11]
        assert np.all(edge[..., 0] > 0), "gx points dark to light"
        assert np.allclose(field[1:-1, :, 1], 0.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        image = rng.uniform(0, 255, size=(14, 11))
        assert np.allclose(sobel_gradients(image), brute_sobel(image), atol=1e-9)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        i1 = rng.uniform(0, 100, size=(13, 13))
        i2 = rng.uniform(0, 100, size=(13, 13))
        lhs = sobel_gradients(2.0 * i1 + 0.5 * i2)
        rhs = 2.0 * sobel_gradients(i1) + 0.5 * sobel_gradients(i2)
        assert np.allclose(lhs, rhs, atol=1e-9)

    def test_rot90_maps_gradients(self):
        rng = np.random.default_rng(5)
        image = rng.uniform(0, 255, size=(17, 17))
        f = sobel_gradients(image)
        fr = sobel_gradients(np.rot90(image))
        # numpy rot90 sends pixel (y, x) to (w-1-x, y) and gradients
        # (gx, gy) to (gy, -gx); spot-check away from the padded border.
        h, w = image.shape
        for y in range(2, h - 2):
            for x in range(2, w - 2):
                gx, gy = f[y, x]
                rx, ry = fr[w - 1 - x, y]
                assert abs(rx - gy) < 1e-9
                assert abs(ry - (-gx)) < 1e-9


class TestIntegralImage:
    def test_box_sums_match_direct(self):
        rng = np.random.default_rng(6)
        values = rng.uniform(-5, 5, size=(9, 13))
        ii = integral_image(values)
        for _ in range(50):
            y0, y1 = sorted(rng.integers(0, 9, size=2))
            x0, x1 = sorted(rng.integers(0, 13, size=2))
            direct = values[y0 : y1 + 1, x0 : x1 + 1].sum()
            assert abs(box_sum(ii, y0, y1, x0, x1) - direct) < 1e-9

    def test_windowed_sums_match_direct(self):
        rng = np.random.default_rng(7)
        values = rng.uniform(0, 10, size=(11, 8))
        for side in (1, 2, 3, 5, 10):
            sums = windowed_sums(values, side)
            counts = window_counts(values.shape, side)
            for y in range(11):
                for x in range(8):
                    y0, y1, x0, x1 = window_bounds(x, y, side, values.shape)
                    patch = values[y0 : y1 + 1, x0 : x1 + 1]
                    assert abs(sums[y, x] - patch.sum()) < 1e-9
                    assert counts[y, x] == patch.size


class TestWindowFraction:
    def field_with(self, flags):
        """Gradient field whose x component is 1 where flag else -1."""
        f = np.zeros(flags.shape + (2,))
        f[..., 0] = np.where(flags, 1.0, -1.0)
        return f

    def test_all_satisfying_is_one(self):
        f = self.field_with(np.ones((20, 20), dtype=bool))
        frac = window_fraction_satisfying(
            f, (10, 10), 10, lambda patch: patch[..., 0] > 0
        )
        assert frac == 1.0

    def test_85_of_100(self):
        flags = np.zeros((20, 20), dtype=bool)
        y0, y1, x0, x1 = window_bounds(10, 10, 10, (20, 20))
        assert (y1 - y0 + 1) * (x1 - x0 + 1) == 100
        cells = [(y, x) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]
        for y, x in cells[:85]:
            flags[y, x] = True
        f = self.field_with(flags)
        frac = window_fraction_satisfying(
            f, (10, 10), 10, lambda patch: patch[..., 0] > 0
        )
        assert frac == pytest.approx(0.85)

    def test_border_clipped_window(self):
        # 10x10 window on the left edge clips to 6x10 = 60 valid pixels.
        flags = np.zeros((30, 30), dtype=bool)
        y0, y1, x0, x1 = window_bounds(0, 15, 10, (30, 30))
        assert (y1 - y0 + 1) * (x1 - x0 + 1) == 60
        cells = [(y, x) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]
        for y, x in cells[:48]:
            flags[y, x] = True
        f = self.field_with(flags)
        frac = window_fraction_satisfying(
            f, (0, 15), 10, lambda patch: patch[..., 0] > 0
        )
        assert frac == pytest.approx(0.8)

    def test_empty_intersection_raises(self):
        f = np.zeros((10, 10, 2))
        with pytest.raises(ValueError):
            window_fraction_satisfying(f, (500, 500), 10, lambda p: p[..., 0] > 0)

    def test_range_and_monotonicity(self):
        rng = np.random.default_rng(8)
        flags = rng.random((25, 25)) < 0.5
        f = self.field_with(flags)
        frac = window_fraction_satisfying(f, (12, 12), 7, lambda p: p[..., 0] > 0)
        assert 0.0 <= frac <= 1.0
        grown = flags.copy()
        grown[10:15, 10:15] = True
        frac2 = window_fraction_satisfying(
            self.field_with(grown), (12, 12), 7, lambda p: p[..., 0] > 0
        )
        assert frac2 >= frac


class TestAdaptiveLighten:
    def test_all_black_stays_black(self):
        out = adaptive_lighten(np.zeros((8, 8)))
        assert np.all(out == 0.0)

    def test_dark_disc_on_bright_field(self):
        image = np.full((40, 40), 200.0)
        ys, xs = np.mgrid[0:40, 0:40]
        disc = (ys - 20) ** 2 + (xs - 20) ** 2 <= 36
        image[disc] = 10.0
        out = adaptive_lighten(image)
        assert np.all(out[~disc] == 255.0), "bright field saturates"
        assert np.all(out[disc] < 255.0)
        assert out[disc].max() == out.min() or np.all(out[disc] == out[disc][0])

    def test_saturated_identity(self):
        out = adaptive_lighten(np.full((5, 5), 255.0))
        assert np.all(out == 255.0)

    def test_preserves_dark_ordering(self):
        rng = np.random.default_rng(9)
        image = rng.uniform(0, 255, size=(30, 30))
        out = adaptive_lighten(image)
        t = np.percentile(image, 30)
        dark = image < t
        a = image[dark].ravel()
        b = out[dark].ravel()
        order = np.argsort(a)
        assert np.all(np.diff(b[order]) >= -1e-9)
