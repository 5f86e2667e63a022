"""HTTP surface of the listening-test service."""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..corpus import Stimulus
from .schemas import (
    BatchResponse,
    BatchStimulus,
    ParticipantInfo,
    RatingAck,
    RatingSubmission,
    SessionCreated,
)
from .store import (
    DuplicateRating,
    InventoryExhausted,
    RatingStore,
    SessionNotFound,
    StimulusNotIssued,
)

ADMIN_TOKEN_ENV = "MOSAICO_ADMIN_TOKEN"


def create_app(
    stimuli: list[Stimulus],
    audio_root,
    tiers: dict[str, int] | None = None,
    seed: int | None = None,
    persist_path=None,
    ui_dir=None,
) -> FastAPI:
    store = RatingStore(stimuli, tiers=tiers, seed=seed, persist_path=persist_path)
    audio_root = Path(audio_root)
    app = FastAPI(title="mosaico rating service")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/api/sessions", response_model=SessionCreated, status_code=201)
    def create_session(info: ParticipantInfo):
        return SessionCreated(session_id=store.create_session(info))

    @app.get("/api/sessions/{session_id}/batch", response_model=BatchResponse)
    def next_batch(session_id: str):
        try:
            batch_index, batch = store.next_batch(session_id)
        except SessionNotFound:
            raise HTTPException(404, f"unknown session {session_id!r}")
        except InventoryExhausted as exc:
            raise HTTPException(409, str(exc))
        return BatchResponse(
            batch_index=batch_index,
            stimuli=[
                BatchStimulus(
                    stimulus_id=s.stimulus_id,
                    audio_url=f"/api/stimuli/{s.stimulus_id}/audio",
                    duration_s=s.duration_s,
                )
                for s in batch
            ],
        )

    @app.post("/api/sessions/{session_id}/ratings", response_model=RatingAck, status_code=201)
    def submit_rating(session_id: str, sub: RatingSubmission):
        try:
            record = store.submit_rating(session_id, sub)
        except SessionNotFound:
            raise HTTPException(404, f"unknown session {session_id!r}")
        except StimulusNotIssued as exc:
            raise HTTPException(404, str(exc))
        except DuplicateRating as exc:
            raise HTTPException(409, str(exc))
        return RatingAck(
            session_id=session_id, stimulus_id=record.stimulus_id, rated=record.score
        )

    @app.get("/api/stimuli/{stimulus_id}/audio")
    def stimulus_audio(stimulus_id: str):
        stim = store.stimuli.get(stimulus_id)
        if stim is None:
            raise HTTPException(404, f"unknown stimulus {stimulus_id!r}")
        path = audio_root / stim.audio_path
        if not path.exists():
            raise HTTPException(404, f"audio file missing for {stimulus_id!r}")
        return FileResponse(path, media_type="audio/wav")

    @app.get("/api/export", response_class=PlainTextResponse)
    def export(x_admin_token: str | None = Header(default=None)):
        expected = os.environ.get(ADMIN_TOKEN_ENV)
        if not expected:
            raise HTTPException(503, f"{ADMIN_TOKEN_ENV} is not configured")
        if x_admin_token != expected:
            raise HTTPException(403, "invalid admin token")
        return store.export_jsonl()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
