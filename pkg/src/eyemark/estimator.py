"""Estimator-style front end over the progressive pipeline.

EyeRegionSegmenter packs every tunable into scikit-learn parameter
conventions (flat constructor args, get_params/set_params, no work in
__init__) so it drops into pipelines and grid searches. The functional
core in pipeline.py stays the single source of behavior.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .eye_region import EyeRegionParams
from .oracle import make_oracle
from .pipeline import Schedule, run_progressive_pipeline
from .pupil_iris import PupilIrisParams


class EyeRegionSegmenter(BaseEstimator):
    """Unsupervised pupil / iris / eye segmenter for near-infrared images.

    Parameters
    ----------
    window_side : int, default=10
        Side of the square vote window for radial-gradient filtering.
    agreement : float, default=0.8
        Fraction of window pixels that must vote outward to keep a gradient.
    pulse_width : int, default=3
        Width of the rectangular pulse convolved along each ray.
    n_rays : int, default=360
        Rays in the fan around the pupil point.
    gstd_window : int, default=5
        Side of the window used for the local gradient spread map.
    gstd_threshold : float, default=5.0
        Spread below which a pixel counts as smooth.
    smooth_fraction : float, default=0.3
        Leading share of each smooth suffix marked as foreground seeds.
    grid_size : int, default=10
        Prompt grid resolution (grid_size x grid_size cells).
    neighborhood : int, default=30
        Angular window (in rays) inspected by the boundary curvature filter.
    curvature_threshold : float, default=20.0
        Largest tolerated second difference of boundary radii.
    rounds : int, default=4
        Total pipeline rounds including the bootstrap round.
    start_round : int or None, default=None
        First round with the eye stage; None means ceil(0.25 * rounds).
    refresh_interval : int, default=1
        Rounds between eye-stage refreshes once started.
    oracle : None, str, or object, default=None
        None runs without refinement; "file:<dir>" or an http(s) URL build
        the matching client; an object is used as-is (must expose
        ``segment(request)``).
    use_prior_filter : bool, default=True
        Prune radial indications against the luminance prior each round.
    random_state : int, default=0
        Seed for prompt sampling (and whatever the oracle derives from it).
    """

    def __init__(self, window_side=10, agreement=0.8, pulse_width=3,
                 n_rays=360, gstd_window=5, gstd_threshold=5.0,
                 smooth_fraction=0.3, grid_size=10, neighborhood=30,
                 curvature_threshold=20.0, rounds=4, start_round=None,
                 refresh_interval=1, oracle=None, use_prior_filter=True,
                 random_state=0):
        self.window_side = window_side
        self.agreement = agreement
        self.pulse_width = pulse_width
        self.n_rays = n_rays
        self.gstd_window = gstd_window
        self.gstd_threshold = gstd_threshold
        self.smooth_fraction = smooth_fraction
        self.grid_size = grid_size
        self.neighborhood = neighborhood
        self.curvature_threshold = curvature_threshold
        self.rounds = rounds
        self.start_round = start_round
        self.refresh_interval = refresh_interval
        self.oracle = oracle
        self.use_prior_filter = use_prior_filter
        self.random_state = random_state

    def _pii_params(self) -> PupilIrisParams:
        return PupilIrisParams(
            window_side=self.window_side,
            agreement=self.agreement,
            pulse_width=self.pulse_width,
            n_rays=self.n_rays,
        )

    def _ei_params(self) -> EyeRegionParams:
        return EyeRegionParams(
            gstd_window=self.gstd_window,
            gstd_threshold=self.gstd_threshold,
            smooth_fraction=self.smooth_fraction,
            grid_size=self.grid_size,
            neighborhood=self.neighborhood,
            curvature_threshold=self.curvature_threshold,
        )

    def _schedule(self) -> Schedule:
        return Schedule(
            total_rounds=self.rounds,
            start_round=self.start_round,
            refresh_interval=self.refresh_interval,
        )

    def _resolve_oracle(self):
        if self.oracle is None or isinstance(self.oracle, str):
            return make_oracle(self.oracle)
        return self.oracle

    @staticmethod
    def _as_dict(X) -> tuple[dict, list | None]:
        """Normalize input to an id -> image dict.

        Returns the dict plus the ordered key list when X was a sequence
        (so outputs can mirror the input order).
        """
        if isinstance(X, dict):
            return {str(k): np.asarray(v) for k, v in X.items()}, None
        images = {}
        order = []
        for i, img in enumerate(X):
            key = str(i)
            images[key] = np.asarray(img)
            order.append(key)
        return images, order

    def fit(self, X, y=None):
        """Segment X and store the results on the estimator.

        X is a dict of id -> 2-D grayscale array, or a sequence of such
        arrays. y is ignored (unsupervised).
        """
        images, order = self._as_dict(X)
        result = run_progressive_pipeline(
            images,
            schedule=self._schedule(),
            oracle=self._resolve_oracle(),
            pii_params=self._pii_params(),
            ei_params=self._ei_params(),
            seed=self.random_state,
            use_prior_filter=self.use_prior_filter,
        )
        self.masks_ = result.masks
        self.failures_ = result.failures
        self.result_ = result
        self._fit_order = order
        return self

    def predict(self, X):
        """Segment X; returns masks without touching fitted state.

        Output mirrors the input container: dict in, dict of MaskSet (or
        None on failure) out; sequence in, list out.
        """
        images, order = self._as_dict(X)
        result = run_progressive_pipeline(
            images,
            schedule=self._schedule(),
            oracle=self._resolve_oracle(),
            pii_params=self._pii_params(),
            ei_params=self._ei_params(),
            seed=self.random_state,
            use_prior_filter=self.use_prior_filter,
        )
        if order is None:
            return result.masks
        return [result.masks[k] for k in order]

    def transform(self, X):
        return self.predict(X)

    def fit_predict(self, X, y=None):
        self.fit(X, y)
        if self._fit_order is None:
            return self.masks_
        return [self.masks_[k] for k in self._fit_order]
