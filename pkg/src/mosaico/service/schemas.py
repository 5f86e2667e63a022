"""Request/response models for the listening-test HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class ParticipantInfo(BaseModel):
    age: int = Field(gt=0, lt=120)
    gender: Literal["M", "F", "unspecified"]
    nationality: str = Field(min_length=1)
    familiarity: int = Field(ge=1, le=5)
    self_reported_normal_hearing: bool


class SessionCreated(BaseModel):
    session_id: str


class BatchStimulus(BaseModel):
    stimulus_id: str
    audio_url: str
    duration_s: float


class BatchResponse(BaseModel):
    batch_index: int
    stimuli: list[BatchStimulus]


class RatingSubmission(BaseModel):
    stimulus_id: str
    score: int = Field(ge=1, le=5)
    listen_ms: float = Field(ge=0)
    response_ms: float = Field(ge=0)


class RatingAck(BaseModel):
    session_id: str
    stimulus_id: str
    rated: int
