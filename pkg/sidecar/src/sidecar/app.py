"""HTTP layer: /qa, /generate, /health per the storyworld backend protocol."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .models import ModelService


class QaRequest(BaseModel):
    context: str
    question: str
    top_k: int = Field(default=5, ge=1, le=50)


class GenerateRequest(BaseModel):
    prompt: str
    max_tokens: int = Field(default=60, ge=1, le=1024)
    temperature: float = Field(default=0.7, ge=0.0, le=4.0)
    stop: list[str] = Field(default_factory=list)
    seed: int = 0


def create_app(service: ModelService) -> FastAPI:
    app = FastAPI(title="storyworld model sidecar")

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "qa_model": service.qa_model_id,
            "gen_model": service.gen_model_id,
        }

    @app.post("/qa")
    def qa(body: QaRequest) -> dict:
        if not body.context.strip():
            raise HTTPException(status_code=400, detail="context must be non-empty")
        if not body.question.strip():
            raise HTTPException(status_code=400, detail="question must be non-empty")
        try:
            return service.qa(body.context, body.question, body.top_k)
        except Exception as exc:  # model failure is a server-side diagnostic
            raise HTTPException(status_code=500, detail=f"qa inference failed: {exc}") from exc

    @app.post("/generate")
    def generate(body: GenerateRequest) -> dict:
        if not body.prompt.strip():
            raise HTTPException(status_code=400, detail="prompt must be non-empty")
        try:
            text = service.generate(body.prompt, body.max_tokens, body.temperature, body.stop, body.seed)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"generation failed: {exc}") from exc
        return {"text": text}

    return app
