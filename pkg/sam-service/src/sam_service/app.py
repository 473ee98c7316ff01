"""FastAPI application implementing the point-prompt wire protocol."""

from __future__ import annotations

import asyncio
import logging
import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from fastapi.concurrency import run_in_threadpool
from pydantic import BaseModel, Field

from .codec import PayloadError, decode_image, encode_mask
from .config import ServiceConfig
from .model import RealModelBackend, StubDiscBackend

logger = logging.getLogger("sam_service")


class SegmentRequest(BaseModel):
    image: str
    positive: list[tuple[int, int]] = Field(default_factory=list)
    negative: list[tuple[int, int]] = Field(default_factory=list)


class SegmentResponse(BaseModel):
    mask: str
    confidence: float


def _check_points(points, shape, label: str) -> None:
    h, w = shape
    for x, y in points:
        if not (0 <= x < w and 0 <= y < h):
            raise HTTPException(
                status_code=422,
                detail=f"{label} point ({x}, {y}) outside image {w}x{h}",
            )


def create_app(config: ServiceConfig, backend=None) -> FastAPI:
    """Build the service around a mask backend chosen by the config.

    A prebuilt backend can be injected for tests; otherwise stub mode
    serves immediately and a configured checkpoint loads in a background
    thread while /segment answers 503.
    """
    if backend is None:
        if config.stub_disc:
            backend = StubDiscBackend()
        else:
            backend = RealModelBackend(config.checkpoint, config.device)

    state = {"loading": False, "error": None}
    needs_load = hasattr(backend, "load") and not getattr(backend, "loaded", True)

    def load_in_background():
        try:
            backend.load()
        except Exception as exc:
            state["error"] = str(exc)
            logger.exception("model load failed")
        finally:
            state["loading"] = False

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if needs_load:
            state["loading"] = True
            threading.Thread(target=load_in_background, daemon=True).start()
        yield

    app = FastAPI(title="sam-service", lifespan=lifespan)
    semaphore = asyncio.Semaphore(config.max_concurrent)

    def ready() -> bool:
        return getattr(backend, "loaded", True)

    @app.get("/health")
    async def health():
        return {
            "status": "error" if state["error"] else "ok",
            "model_loaded": ready(),
            "loading": state["loading"],
        }

    @app.post("/segment", response_model=SegmentResponse)
    async def segment(request: SegmentRequest):
        if not ready():
            raise HTTPException(status_code=503, detail="model not loaded")
        if not request.positive:
            raise HTTPException(status_code=422,
                                detail="at least one positive point required")
        try:
            image = decode_image(request.image)
        except PayloadError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        _check_points(request.positive, image.shape, "positive")
        _check_points(request.negative, image.shape, "negative")

        async with semaphore:
            try:
                mask, confidence = await run_in_threadpool(
                    backend.predict, image, request.positive, request.negative
                )
            except Exception as exc:
                logger.exception("inference failed")
                raise HTTPException(status_code=500,
                                    detail=f"inference failed: {exc}") from exc
        return SegmentResponse(mask=encode_mask(mask), confidence=confidence)

    return app
