from __future__ import annotations

import numpy as np
import pytest

from eyemark.render import render_eye, sample_scene


@pytest.fixture(scope="session")
def clean_scene():
    """One deterministic clean render: (spec, image, ground truth)."""
    rng = np.random.default_rng(1)
    spec = sample_scene("clean", rng)
    image, gt = render_eye(spec)
    return spec, image, gt


@pytest.fixture(scope="session")
def occluded_scene():
    rng = np.random.default_rng(2)
    spec = sample_scene("occluded", rng)
    image, gt = render_eye(spec)
    return spec, image, gt
