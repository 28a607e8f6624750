"""HTTP session service around the engine.

The server adds no game logic: every command runs through the same engine
step a local session would use, so responses are byte-identical to local
play. Sessions are keyed by unguessable tokens, serialized per session,
and expire after an idle TTL.
"""

from __future__ import annotations

import logging
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .engine import Session, new_session
from .gamegen import GameWorld, load_game

logger = logging.getLogger(__name__)

MAX_INPUT_BYTES = 1024
DEFAULT_TTL_SECONDS = 3600.0


class CreateSessionRequest(BaseModel):
    game_id: str


class CommandRequest(BaseModel):
    input: str


@dataclass
class SessionRecord:
    session: Session
    game_id: str
    created: float
    last_active: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class GameService:
    """Holds immutable game definitions and the live session table."""

    def __init__(self, games: dict[str, GameWorld], ttl_seconds: float = DEFAULT_TTL_SECONDS):
        self.games = dict(games)
        self.ttl_seconds = ttl_seconds
        self.sessions: dict[str, SessionRecord] = {}
        self._table_lock = threading.Lock()

    @classmethod
    def from_directory(cls, game_dir: str | Path, ttl_seconds: float = DEFAULT_TTL_SECONDS) -> "GameService":
        games: dict[str, GameWorld] = {}
        for path in sorted(Path(game_dir).glob("*.json")):
            games[path.stem] = load_game(path)
        return cls(games, ttl_seconds=ttl_seconds)

    def _sweep(self, now: float) -> None:
        expired = [sid for sid, rec in self.sessions.items() if now - rec.last_active > self.ttl_seconds]
        for sid in expired:
            del self.sessions[sid]

    def create_session(self, game_id: str) -> tuple[str, SessionRecord, str]:
        world = self.games.get(game_id)
        if world is None:
            raise HTTPException(status_code=404, detail=f"unknown game {game_id!r}")
        session, intro = new_session(world)
        now = time.monotonic()
        record = SessionRecord(session=session, game_id=game_id, created=now, last_active=now)
        with self._table_lock:
            self._sweep(now)
            session_id = secrets.token_urlsafe(24)  # 192 bits
            self.sessions[session_id] = record
        return session_id, record, intro

    def get_record(self, session_id: str) -> SessionRecord:
        now = time.monotonic()
        with self._table_lock:
            record = self.sessions.get(session_id)
            if record is not None and now - record.last_active > self.ttl_seconds:
                del self.sessions[session_id]
                record = None
        if record is None:
            raise HTTPException(status_code=410, detail="session is unknown or has expired")
        return record


def _status(session: Session) -> dict:
    return {
        "score": session.score,
        "max_score": session.world.max_score,
        "done": session.done,
    }


def create_app(
    game_dir: str | Path | None = None,
    games: dict[str, GameWorld] | None = None,
    ttl_seconds: float = DEFAULT_TTL_SECONDS,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the FastAPI app for a directory (or explicit dict) of games."""
    if games is None:
        if game_dir is None:
            raise ValueError("create_app needs game_dir or games")
        service = GameService.from_directory(game_dir, ttl_seconds=ttl_seconds)
    else:
        service = GameService(games, ttl_seconds=ttl_seconds)

    app = FastAPI(title="storyworld session server")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/games")
    def list_games() -> dict:
        return {
            "games": [
                {
                    "id": game_id,
                    "title": world.metadata.get("title", game_id),
                    "genre": world.metadata.get("genre", "other"),
                }
                for game_id, world in sorted(service.games.items())
            ]
        }

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest) -> dict:
        session_id, record, intro = service.create_session(body.game_id)
        return {"session_id": session_id, "intro": intro, **_status(record.session)}

    @app.post("/sessions/{session_id}/command")
    def run_command(session_id: str, body: CommandRequest) -> dict:
        if len(body.input.encode("utf-8")) > MAX_INPUT_BYTES:
            raise HTTPException(status_code=413, detail=f"input exceeds {MAX_INPUT_BYTES} bytes")
        record = service.get_record(session_id)
        with record.lock:  # strict per-session ordering
            output = record.session.execute(body.input)
            record.last_active = time.monotonic()
            return {"output": output, **_status(record.session)}

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str) -> dict:
        record = service.get_record(session_id)
        with record.lock:
            return {"transcript": list(record.session.transcript), **_status(record.session)}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/play", StaticFiles(directory=str(static_dir), html=True), name="play")

    return app
