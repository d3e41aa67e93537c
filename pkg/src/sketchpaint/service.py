"""HTTP painting service.

One model is loaded at startup and shared read-only across requests; a
semaphore bounds concurrent inference. Responses are pure functions of
(checkpoint, request): no cross-request state exists.

Endpoints:
  POST /paint   multipart sketch PNG + optional scribbles JSON + optional seed -> PNG
  GET  /health  {status, model_id, resolution}
  GET  /model   architecture and checkpoint summary
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, Form, UploadFile
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .hints import HintParamError, parse_scribbles
from .image import ImageError, decode_png, encode_png
from .networks import discriminator_receptive_field
from .painter import Painter


class HealthResponse(BaseModel):
    status: str
    model_id: str
    resolution: int


class ModelInfo(BaseModel):
    model_id: str
    resolution: int
    depth: int
    base_filters: int
    input_channels: int
    output_channels: int
    noise_stddev: float
    parameters: int
    checkpoint: str
    trained_steps: int
    patch_grid_size: int
    patch_receptive_field: int


class ErrorBody(BaseModel):
    error: str


def create_app(
    checkpoint_path: str | Path,
    workers: int = 4,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    painter = Painter(checkpoint_path)
    gate = threading.Semaphore(max(1, workers))
    app = FastAPI(title="sketchpaint", version="0.1.0")

    @app.exception_handler(ImageError)
    async def _image_error(_, exc: ImageError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(HintParamError)
    async def _hint_error(_, exc: HintParamError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def _unexpected(_, exc: Exception):
        # Inference failures must not take the service down.
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ready", model_id=painter.model_id, resolution=painter.resolution
        )

    @app.get("/model", response_model=ModelInfo)
    def model() -> ModelInfo:
        d = painter.describe()
        dcfg = painter.train_config.discriminator_config()
        return ModelInfo(
            **d,
            patch_grid_size=dcfg.grid_size,
            patch_receptive_field=discriminator_receptive_field(dcfg),
        )

    @app.post(
        "/paint",
        responses={200: {"content": {"image/png": {}}}, 400: {"model": ErrorBody}},
    )
    def paint_endpoint(
        sketch: UploadFile,
        scribbles: str | None = Form(default=None),
        seed: int | None = Form(default=None),
        model_id: str | None = Form(default=None),
    ) -> Response:
        if model_id is not None and model_id != painter.model_id:
            return JSONResponse(
                status_code=400,
                content={
                    "error": f"model_id {model_id!r} does not match loaded "
                    f"model {painter.model_id!r}"
                },
            )
        sketch_img = decode_png(sketch.file.read())
        strokes = parse_scribbles(scribbles) if scribbles else None
        with gate:
            painted, box = painter.paint(sketch_img, strokes, noise_seed=seed)
        return Response(
            content=encode_png(painted),
            media_type="image/png",
            headers={
                "X-Crop-Box": json.dumps(box.to_dict()),
                "X-Model-Id": painter.model_id,
            },
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
