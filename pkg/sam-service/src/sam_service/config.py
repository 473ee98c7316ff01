"""Service configuration with startup-time validation."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

CHECKPOINT_ENV = "SAM_SERVICE_CHECKPOINT"


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the process needs to decide how to serve.

    Exactly one mask source must be configured: a model checkpoint to
    load, or the deterministic stub for integration testing.
    """

    checkpoint: str | None = None
    device: str = "cpu"
    port: int = 8750
    max_concurrent: int = 4
    stub_disc: bool = False

    def __post_init__(self):
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port {self.port} out of range")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.checkpoint is not None and not Path(self.checkpoint).is_file():
            raise ValueError(f"checkpoint {self.checkpoint!r} does not exist")
        if self.checkpoint is not None and self.stub_disc:
            raise ValueError("choose either a checkpoint or --stub-disc, not both")
        if self.checkpoint is None and not self.stub_disc:
            raise ValueError(
                f"no mask source: set {CHECKPOINT_ENV}, pass --checkpoint,"
                " or run with --stub-disc"
            )


def checkpoint_from_env() -> str | None:
    """Checkpoint path from the environment, empty string meaning unset."""
    value = os.environ.get(CHECKPOINT_ENV, "").strip()
    return value or None
