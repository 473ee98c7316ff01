"""Eye-region stage: smoothness cues, prompts, boundary walks, curvature filter."""

import numpy as np
import pytest

from eyemark import labels as L
from eyemark.eye_region import (
    BoundaryPoints,
    EyeRegionParams,
    SmoothnessMap,
    extract_boundary,
    grid_prompts,
    gstd_map,
    initial_eye_indication,
    refine_eye_indications,
    refined_indication,
    second_derivative_filter,
    second_differences,
)
from eyemark.imaging import sobel_gradients
from eyemark.oracle import SegmentationResponse
from eyemark.rays import RayFan


def field_from_magnitudes(mags):
    """Gradient field whose magnitudes equal the given array."""
    f = np.zeros(mags.shape + (2,), dtype=np.float64)
    f[..., 0] = mags
    return f


class TestGstdMap:
    def test_constant_image_is_smooth_everywhere(self):
        out = gstd_map(np.full((20, 20), 90.0))
        assert np.allclose(out.gstd, 0.0)
        assert out.smooth.all()

    def test_single_spike_window_value(self):
        # A 3x3 window holding eight zeros and one 10: population std
        # sqrt(100/9 - (10/9)^2) = (10/9) * sqrt(8).
        mags = np.zeros((9, 9))
        mags[4, 4] = 10.0
        params = EyeRegionParams(gstd_window=3)
        out = gstd_map(field_from_magnitudes(mags), params)
        expected = (10.0 / 9.0) * np.sqrt(8.0)
        assert out.gstd[4, 4] == pytest.approx(expected, abs=1e-9)
        assert out.smooth[4, 4], "3.14 is below the default threshold of 5"

    def test_alternating_magnitudes_are_rough(self):
        yy, xx = np.mgrid[0:12, 0:12]
        mags = np.where((yy + xx) % 2 == 0, 0.0, 20.0)
        out = gstd_map(field_from_magnitudes(mags))
        assert not out.smooth[4:8, 4:8].any(), "std ~10 must exceed 5"

    def test_matches_per_pixel_brute_force(self):
        rng = np.random.default_rng(14)
        mags = rng.uniform(0, 30, size=(18, 22))
        params = EyeRegionParams(gstd_window=5)
        out = gstd_map(field_from_magnitudes(mags), params)
        lo, hi = (5 - 1) // 2, 5 // 2
        for y in range(18):
            for x in range(22):
                patch = mags[max(0, y - lo) : y + hi + 1, max(0, x - lo) : x + hi + 1]
                assert out.gstd[y, x] == pytest.approx(np.std(patch), abs=1e-9), (
                    f"gstd mismatch at ({x}, {y})"
                )

    def test_image_and_field_inputs_agree(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(0, 255, size=(16, 16))
        a = gstd_map(img)
        b = gstd_map(sobel_gradients(img))
        assert np.array_equal(a.gstd, b.gstd)

    def test_threshold_is_strict(self):
        mags = np.zeros((7, 7))
        params = EyeRegionParams(gstd_window=1, gstd_threshold=5.0)
        out = gstd_map(field_from_magnitudes(mags), params)
        assert out.smooth.all()
        # windowed std of a single sample is 0 < 5; a uniform field at any
        # level keeps std 0, so smoothness cannot depend on the level
        out2 = gstd_map(field_from_magnitudes(mags + 100.0), params)
        assert out2.smooth.all()


class TestInitialIndication:
    @pytest.fixture
    def setup(self):
        h = w = 41
        fan = RayFan((20, 20), (h, w), n_rays=4)
        yy, xx = np.mgrid[0:h, 0:w]
        region = (xx - 20) ** 2 + (yy - 20) ** 2 <= 25
        return fan, region

    @staticmethod
    def all_smooth(shape):
        return SmoothnessMap(
            gstd=np.zeros(shape), smooth=np.ones(shape, dtype=bool), threshold=5.0
        )

    def test_suffix_splits_head_and_tail(self, setup):
        fan, region = setup
        out = initial_eye_indication(self.all_smooth((41, 41)), region, fan)
        # Ray 0 points +x from (20, 20): exit at t=6, suffix t=6..20
        # (15 samples), side count int(15 * 0.3) = 4.
        assert np.all(out.labels[20, 26:30] == L.EYE_FG), "head must be foreground"
        assert np.all(out.labels[20, 37:41] == L.EYE_BG), "tail must be background"
        assert np.all(out.labels[20, 30:37] == L.IGNORE), "middle must stay ignored"

    def test_region_pixels_are_all_foreground(self, setup):
        fan, region = setup
        out = initial_eye_indication(self.all_smooth((41, 41)), region, fan)
        assert np.all(out.labels[region] == L.EYE_FG)

    def test_rough_suffix_labels_nothing(self, setup):
        fan, region = setup
        rough = SmoothnessMap(
            gstd=np.full((41, 41), 99.0),
            smooth=np.zeros((41, 41), dtype=bool),
            threshold=5.0,
        )
        out = initial_eye_indication(rough, region, fan)
        assert np.all(out.labels[region] == L.EYE_FG)
        assert not out.labels[~region].any()

    def test_ray_that_never_exits_contributes_nothing_beyond(self, setup):
        fan, _ = setup
        region = np.ones((41, 41), dtype=bool)
        out = initial_eye_indication(self.all_smooth((41, 41)), region, fan)
        assert np.all(out.labels == L.EYE_FG)

    def test_empty_region_is_rejected(self, setup):
        fan, _ = setup
        with pytest.raises(ValueError, match="empty"):
            initial_eye_indication(
                self.all_smooth((41, 41)), np.zeros((41, 41), dtype=bool), fan
            )

    def test_too_few_smooth_samples_labels_nothing(self, setup):
        fan, region = setup
        # two smooth samples per suffix: int(2 * 0.3) = 0, so no labels
        smooth = np.zeros((41, 41), dtype=bool)
        smooth[20, 27:29] = True
        sm = SmoothnessMap(gstd=np.zeros((41, 41)), smooth=smooth, threshold=5.0)
        out = initial_eye_indication(sm, region, fan)
        assert not out.labels[~region].any()


class TestGridPrompts:
    def test_all_ignore_yields_no_prompts(self):
        assert grid_prompts(np.zeros((50, 50), dtype=np.uint8), 10, seed=0) == []

    def test_pure_foreground_cell_is_positive(self):
        labels = np.zeros((50, 50), dtype=np.uint8)
        labels[0:5, 0:5] = L.EYE_FG
        prompts = grid_prompts(labels, 10, seed=1)
        assert len(prompts) == 1
        p = prompts[0]
        assert p.positive
        assert labels[p.point[1], p.point[0]] == L.EYE_FG

    def test_majority_and_tie_polarity(self):
        labels = np.zeros((10, 10), dtype=np.uint8)
        labels[0:6, 0:10] = L.EYE_FG
        labels[6:10, 0:10] = L.EYE_BG
        (p,) = grid_prompts(labels, 1, seed=0)
        assert p.positive, "60/40 split must go positive"

        labels[5:10, 0:10] = L.EYE_BG
        (p,) = grid_prompts(labels, 1, seed=0)
        assert not p.positive, "a 50/50 tie must go negative"

    def test_background_counts_toward_negative(self):
        labels = np.full((10, 10), L.BACKGROUND, dtype=np.uint8)
        (p,) = grid_prompts(labels, 1, seed=0)
        assert not p.positive
        assert labels[p.point[1], p.point[0]] == L.BACKGROUND

    def test_at_most_one_prompt_per_cell(self):
        rng = np.random.default_rng(9)
        labels = rng.choice(
            [L.IGNORE, L.EYE_FG, L.EYE_BG], size=(64, 64)
        ).astype(np.uint8)
        prompts = grid_prompts(labels, 10, seed=3)
        assert len(prompts) <= 100
        cells = set()
        for p in prompts:
            cell = (p.point[0] // 6, p.point[1] // 6)
            # cell edges are floor-division based; recompute allowing the
            # remainder-absorbing last row/column
            cx = min(p.point[0] // 6, 9)
            cy = min(p.point[1] // 6, 9)
            assert (cx, cy) not in cells, f"two prompts in cell {(cx, cy)}"
            cells.add((cx, cy))

    def test_prompt_pixel_matches_its_polarity(self):
        rng = np.random.default_rng(10)
        labels = rng.choice(
            [L.IGNORE, L.EYE_FG, L.EYE_BG, L.BACKGROUND], size=(40, 40)
        ).astype(np.uint8)
        for p in grid_prompts(labels, 8, seed=4):
            value = labels[p.point[1], p.point[0]]
            if p.positive:
                assert value == L.EYE_FG
            else:
                assert value in (L.EYE_BG, L.BACKGROUND)

    def test_same_seed_reproduces_prompts(self):
        rng = np.random.default_rng(12)
        labels = rng.choice([L.IGNORE, L.EYE_FG, L.EYE_BG], size=(30, 30)).astype(
            np.uint8
        )
        assert grid_prompts(labels, 5, seed=7) == grid_prompts(labels, 5, seed=7)

    def test_last_cells_absorb_the_remainder(self):
        labels = np.full((25, 25), L.EYE_FG, dtype=np.uint8)
        prompts = grid_prompts(labels, 10, seed=0)
        assert len(prompts) == 100, "every cell is pure foreground"
        xs = [p.point[0] for p in prompts]
        ys = [p.point[1] for p in prompts]
        assert max(xs) >= 18 and max(ys) >= 18, "remainder region never sampled"


class TestExtractBoundary:
    def test_disc_boundary_distances(self):
        h = w = 121
        fan = RayFan((60, 60), (h, w), n_rays=90)
        yy, xx = np.mgrid[0:h, 0:w]
        mask = (xx - 60) ** 2 + (yy - 60) ** 2 <= 50**2
        bp = extract_boundary(mask, fan)
        assert bp.present.all()
        assert np.all(np.abs(bp.distance - 50.0) <= 1.5)

    def test_empty_mask_has_no_crossings(self):
        fan = RayFan((10, 10), (21, 21), n_rays=8)
        bp = extract_boundary(np.zeros((21, 21), dtype=bool), fan)
        assert not bp.present.any()
        assert np.isnan(bp.distance).all()

    def test_full_mask_never_exits(self):
        fan = RayFan((10, 10), (21, 21), n_rays=8)
        bp = extract_boundary(np.ones((21, 21), dtype=bool), fan)
        assert not bp.present.any()

    def test_ring_mask_misses_the_origin(self):
        h = w = 61
        yy, xx = np.mgrid[0:h, 0:w]
        rho = np.hypot(xx - 30, yy - 30)
        ring = (rho >= 15) & (rho <= 25)
        fan = RayFan((30, 30), (h, w), n_rays=16)
        bp = extract_boundary(ring, fan)
        assert not bp.present.any(), "rays start on a non-positive sample"

    def test_nearest_crossing_invariant(self):
        from scipy.ndimage import gaussian_filter

        rng = np.random.default_rng(23)
        for _ in range(5):
            blob = gaussian_filter(rng.normal(size=(61, 61)), 6.0)
            mask = blob > np.quantile(blob, 0.6)
            mask[28:33, 28:33] = True  # make the origin positive
            fan = RayFan((30, 30), (61, 61), n_rays=72)
            bp = extract_boundary(mask, fan)
            pos = fan.sample_flags(mask)
            for i in range(fan.n_rays):
                row = pos[i, : fan.lengths[i]]
                if bp.present[i]:
                    d = int(bp.distance[i])
                    assert row[: d + 1].all(), f"ray {i}: gap before the boundary"
                    assert not row[d + 1], f"ray {i}: boundary is not a crossing"
                else:
                    assert not row[0] or row.all(), f"ray {i} wrongly absent"


class TestSecondDifferences:
    def test_constant_distances_have_zero_curvature(self):
        bp = BoundaryPoints(
            distance=np.full(12, 30.0), present=np.ones(12, dtype=bool)
        )
        assert np.allclose(second_differences(bp), 0.0)

    def test_spike_value_is_exact(self):
        dist = np.array([10.0, 10.0, 50.0, 10.0, 10.0])
        bp = BoundaryPoints(distance=dist, present=np.ones(5, dtype=bool))
        d2 = second_differences(bp)
        assert d2[2] == -80.0
        assert d2[1] == 40.0
        assert d2[3] == 40.0
        assert d2[0] == 0.0, "wraps circularly to indices 4 and 1"

    def test_absent_neighbor_is_nan(self):
        present = np.ones(6, dtype=bool)
        present[2] = False
        bp = BoundaryPoints(distance=np.full(6, 10.0), present=present)
        d2 = second_differences(bp)
        assert np.isnan(d2[1]) and np.isnan(d2[3]), "neighbors of a hole"
        assert np.isnan(d2[2]), "absent points have no value"
        assert d2[0] == 0.0 and d2[5] == 0.0


def brute_curvature_filter(distance, present, neighborhood, threshold):
    """Reference filter: O(N * neighborhood) scan over the retained ring."""
    n = len(distance)
    idx = [i for i in range(n) if present[i]]
    m = len(idx)
    keep = np.zeros(n, dtype=bool)
    if m == 0:
        return keep
    bad = []
    for i in idx:
        ip, iq = (i - 1) % n, (i + 1) % n
        if not (present[ip] and present[iq]):
            bad.append(True)
        else:
            d2 = distance[iq] - 2.0 * distance[i] + distance[ip]
            bad.append(abs(d2) > threshold)
    half = neighborhood // 2
    for p, i in enumerate(idx):
        keep[i] = not any(bad[(p + o) % m] for o in range(-half, half + 1))
    return keep


class TestCurvatureFilter:
    def test_smooth_ring_is_fully_kept(self):
        theta = 2.0 * np.pi * np.arange(72) / 72
        dist = 40.0 + 3.0 * np.cos(theta)
        bp = BoundaryPoints(distance=dist, present=np.ones(72, dtype=bool))
        out = second_derivative_filter(bp)
        assert out.present.all(), "gentle curvature must survive"

    def test_spike_removes_its_neighborhood(self):
        dist = np.full(40, 10.0)
        dist[20] = 50.0
        bp = BoundaryPoints(distance=dist, present=np.ones(40, dtype=bool))
        params = EyeRegionParams(neighborhood=6)
        out = second_derivative_filter(bp, params)
        # bad points are 19, 20, 21; deletion spreads 3 more on each side
        expected_deleted = set(range(16, 25))
        assert set(np.flatnonzero(~out.present)) == expected_deleted

    def test_matches_brute_force_on_random_rings(self):
        rng = np.random.default_rng(55)
        params = EyeRegionParams(neighborhood=30, curvature_threshold=20.0)
        for trial in range(30):
            n = int(rng.integers(10, 80))
            theta = 2.0 * np.pi * np.arange(n) / n
            dist = 40.0 + 10.0 * np.cos(theta * rng.integers(1, 4))
            spikes = rng.random(n) < 0.1
            dist[spikes] += rng.uniform(-60, 60, size=int(spikes.sum()))
            present = rng.random(n) < 0.85
            dist = np.where(present, dist, np.nan)
            bp = BoundaryPoints(distance=dist, present=present)
            ours = second_derivative_filter(bp, params)
            ref = brute_curvature_filter(dist, present, 30, 20.0)
            assert np.array_equal(ours.present, ref), f"trial {trial}: set mismatch"
            kept = np.flatnonzero(ours.present)
            assert np.array_equal(ours.distance[kept], dist[kept])
            assert np.isnan(ours.distance[~ours.present]).all()

    def test_empty_boundary_passes_through(self):
        bp = BoundaryPoints(distance=np.full(10, np.nan), present=np.zeros(10, bool))
        out = second_derivative_filter(bp)
        assert not out.present.any()


class TestRefinedIndication:
    def test_foreground_up_to_the_floor_of_the_cut(self):
        fan = RayFan((20, 20), (41, 41), n_rays=4)
        bp = BoundaryPoints(
            distance=np.full(4, 10.2), present=np.ones(4, dtype=bool)
        )
        out = refined_indication(bp, fan)
        assert out.refined
        assert np.all(out.labels[20, 20:31] == L.EYE_FG)
        assert np.all(out.labels[20, 31:41] == L.EYE_BG)

    def test_foreground_claim_wins_shared_pixels(self):
        fan = RayFan((50, 50), (100, 100), n_rays=360)
        dist = np.full(360, np.nan)
        present = np.zeros(360, dtype=bool)
        dist[0], present[0] = 3.0, True   # pixel t=5 becomes background
        dist[1], present[1] = 8.0, True   # same pixel t=5 is foreground
        bp = BoundaryPoints(distance=dist, present=present)
        out = refined_indication(bp, fan)
        assert out.labels[50, 55] == L.EYE_FG

    def test_absent_rays_contribute_nothing(self):
        fan = RayFan((20, 20), (41, 41), n_rays=4)
        present = np.array([True, False, False, False])
        dist = np.array([5.0, np.nan, np.nan, np.nan])
        out = refined_indication(BoundaryPoints(distance=dist, present=present), fan)
        assert not out.labels[20, 0:20].any(), "the -x ray is absent"
        assert out.labels[20, 25] == L.EYE_FG, "the boundary sample is foreground"
        assert out.labels[20, 26] == L.EYE_BG


class FixedMaskOracle:
    """Test double answering every request with one fixed mask."""

    def __init__(self, mask):
        self._mask = np.asarray(mask, dtype=bool)
        self.requests = []

    def segment(self, request):
        self.requests.append(request)
        return SegmentationResponse(mask=self._mask.copy(), confidence=1.0)


class TestRefineIntegration:
    @pytest.fixture
    def initial(self):
        h = w = 101
        fan = RayFan((50, 50), (h, w), n_rays=90)
        yy, xx = np.mgrid[0:h, 0:w]
        region = (xx - 50) ** 2 + (yy - 50) ** 2 <= 100
        smooth = SmoothnessMap(
            gstd=np.zeros((h, w)), smooth=np.ones((h, w), dtype=bool), threshold=5.0
        )
        image = np.full((h, w), 128.0)
        return image, initial_eye_indication(smooth, region, fan)

    def test_disc_oracle_refines_the_boundary(self, initial):
        image, ind = initial
        yy, xx = np.mgrid[0:101, 0:101]
        oracle = FixedMaskOracle((xx - 50) ** 2 + (yy - 50) ** 2 <= 30**2)
        out = refine_eye_indications(image, ind, oracle, seed=5)
        assert out.refined
        rho = np.hypot(xx - 50, yy - 50)
        fg = out.labels == L.EYE_FG
        bg = out.labels == L.EYE_BG
        assert fg.any() and bg.any()
        assert rho[fg].max() <= 31.5
        assert rho[bg].min() >= 29.0

    def test_prompts_follow_the_initial_labels(self, initial):
        image, ind = initial
        yy, xx = np.mgrid[0:101, 0:101]
        oracle = FixedMaskOracle((xx - 50) ** 2 + (yy - 50) ** 2 <= 30**2)
        refine_eye_indications(image, ind, oracle, seed=5)
        (request,) = oracle.requests
        assert len(request.positive) >= 1
        for x, y in request.positive:
            assert ind.labels[y, x] == L.EYE_FG

    def test_no_positive_prompts_returns_the_initial(self, initial):
        image, ind = initial
        ind.labels = np.where(
            ind.labels == L.EYE_FG, L.EYE_BG, ind.labels
        ).astype(np.uint8)
        oracle = FixedMaskOracle(np.ones((101, 101), dtype=bool))
        out = refine_eye_indications(image, ind, oracle, seed=0)
        assert out is ind
        assert oracle.requests == [], "the oracle must not be called"

    def test_boundaryless_oracle_mask_falls_back(self, initial):
        image, ind = initial
        oracle = FixedMaskOracle(np.ones((101, 101), dtype=bool))
        out = refine_eye_indications(image, ind, oracle, seed=0)
        assert out is ind, "an all-positive mask has no crossings"
