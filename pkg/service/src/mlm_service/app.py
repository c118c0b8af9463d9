"""HTTP service exposing the scorer protocol: POST /score, POST /embed,
POST /importance, GET /models. JSON in, JSON out; unknown model keys give a
structured 404, malformed bodies a validation error."""

from __future__ import annotations

import logging

import torch
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from . import inference
from .registry import ModelRegistry, model_key

log = logging.getLogger(__name__)


class ModelRef(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    kind: str
    topic: str
    family: str
    source: str | None = None

    def key(self) -> str:
        return model_key(self.kind, self.source, self.topic, self.family)


class ScoreMode(BaseModel):
    top_k: int | None = None
    candidates: list[str] | None = None


class ScoreBody(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    model: ModelRef
    text: str
    mode: ScoreMode


class TextBody(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    model: ModelRef
    text: str


def create_app(registry: ModelRegistry) -> FastAPI:
    torch.set_num_threads(1)   # byte-identical responses across requests
    app = FastAPI(title="mlm-service")

    def resolve(ref: ModelRef, want_classifier: bool | None = None):
        try:
            entry, model, tokenizer = registry.load(ref.key())
        except KeyError:
            return None, JSONResponse(
                status_code=404,
                content={"error": f"model not registered: {ref.key()}"})
        if want_classifier is True and entry.kind != "classifier":
            return None, JSONResponse(
                status_code=400,
                content={"error": f"{ref.key()} is not a classifier"})
        if want_classifier is False and entry.kind == "classifier":
            return None, JSONResponse(
                status_code=400,
                content={"error": f"{ref.key()} is a classifier; "
                                  "use /importance or /embed"})
        return (model, tokenizer), None

    @app.exception_handler(inference.InferenceError)
    async def on_inference_error(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/score")
    def score(body: ScoreBody):
        if (body.mode.top_k is None) == (body.mode.candidates is None):
            return JSONResponse(
                status_code=400,
                content={"error": "mode must set exactly one of top_k / "
                                  "candidates"})
        loaded, error = resolve(body.model, want_classifier=False)
        if error:
            return error
        model, tokenizer = loaded
        if body.mode.top_k is not None:
            entries = inference.score_top_k(model, tokenizer, body.text,
                                            body.mode.top_k)
        else:
            entries = inference.score_candidates(model, tokenizer, body.text,
                                                 body.mode.candidates)
        return {"entries": entries}

    @app.post("/embed")
    def embed(body: TextBody):
        loaded, error = resolve(body.model)
        if error:
            return error
        model, tokenizer = loaded
        return {"vector": inference.embed(model, tokenizer, body.text)}

    @app.post("/importance")
    def importance(body: TextBody):
        loaded, error = resolve(body.model, want_classifier=True)
        if error:
            return error
        model, tokenizer = loaded
        return inference.importance(model, tokenizer, body.text)

    @app.get("/models")
    def models():
        return {"models": registry.listing()}

    return app


def serve(registry: ModelRegistry, port: int = 8400,
          host: str = "127.0.0.1") -> None:
    import uvicorn
    uvicorn.run(create_app(registry), host=host, port=port)
