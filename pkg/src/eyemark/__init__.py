"""Unsupervised eye-region segmentation for near-infrared images.

Builds sparse pupil, iris, and whole-eye indications from image evidence
alone (radial gradient consensus, run statistics, local smoothness),
densifies them into nested masks, and refreshes everything over a few
prior-aware rounds, optionally steered by a promptable segmentation
oracle behind a small HTTP protocol.
"""

from .densify import (
    EllipseParams,
    MaskSet,
    densify_eye,
    densify_pupil_iris,
    fit_ellipse,
    masks_from_ellipses,
)
from .estimator import EyeRegionSegmenter
from .evaluate import EvalReport, evaluate, iou, report_json, report_text
from .exceptions import (
    EmptyMaskError,
    EyemarkError,
    FitError,
    OracleProtocolError,
    OracleTransportError,
    PupilNotFoundError,
)
from .eye_region import (
    EyeIndications,
    EyeRegionParams,
    grid_prompts,
    initial_eye_indication,
    refine_eye_indications,
)
from .locate import locate_pupil_point
from .oracle import (
    FileOracle,
    HttpOracle,
    MockPerturbedOracle,
    SegmentationRequest,
    SegmentationResponse,
    make_oracle,
)
from .pipeline import (
    PipelineResult,
    Schedule,
    run_progressive_pipeline,
    run_single_image,
)
from .pupil_iris import (
    PupilIrisIndications,
    PupilIrisParams,
    generate_pupil_iris_indications,
)
from .render import EyeSceneSpec, generate_corpus, render_eye, sample_scene
from .version import __version__

__all__ = [
    "EllipseParams",
    "EmptyMaskError",
    "EvalReport",
    "EyeIndications",
    "EyeRegionParams",
    "EyeRegionSegmenter",
    "EyeSceneSpec",
    "EyemarkError",
    "FileOracle",
    "FitError",
    "HttpOracle",
    "MaskSet",
    "MockPerturbedOracle",
    "OracleProtocolError",
    "OracleTransportError",
    "PipelineResult",
    "PupilIrisIndications",
    "PupilIrisParams",
    "PupilNotFoundError",
    "Schedule",
    "SegmentationRequest",
    "SegmentationResponse",
    "densify_eye",
    "densify_pupil_iris",
    "evaluate",
    "fit_ellipse",
    "generate_corpus",
    "generate_pupil_iris_indications",
    "grid_prompts",
    "initial_eye_indication",
    "iou",
    "locate_pupil_point",
    "make_oracle",
    "masks_from_ellipses",
    "refine_eye_indications",
    "render_eye",
    "report_json",
    "report_text",
    "run_progressive_pipeline",
    "run_single_image",
    "sample_scene",
    "__version__",
]
