"""Pydantic request/response models for the session service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class WordIn(BaseModel):
    w: str
    s: float
    e: float


class SegmentIn(BaseModel):
    id: str
    start: float
    end: float
    words: list[WordIn] = Field(default_factory=list)
    embedding: list[float] | None = None
    label: str | None = None


class SeedIn(BaseModel):
    speaker: str
    embedding: list[float]


class GatewayIn(BaseModel):
    kind: str = "rule"  # echo | scripted | rule | http
    endpoint: str | None = None
    scripted: dict[str, str] = Field(default_factory=dict)


class TogglesIn(BaseModel):
    swm: bool = False
    oe: bool = True
    corrections: bool = True


class ConfigIn(BaseModel):
    swm_window_s: float = 1.0
    swm_stride_s: float = 0.2
    dominance: float = 0.7
    summary_interval: int = 15
    correction_limit: int = 30
    max_online_enrollments: int | None = None
    display_mode: str = "summary"
    correction_context_turns: int | None = None
    collar_s: float = 0.0


class OpenSessionRequest(BaseModel):
    config: ConfigIn = Field(default_factory=ConfigIn)
    seeds: list[SeedIn]
    gateway: GatewayIn = Field(default_factory=GatewayIn)
    toggles: TogglesIn = Field(default_factory=TogglesIn)


class OpenSessionResponse(BaseModel):
    session_id: str
    speakers: list[str]


class FeedbackIn(BaseModel):
    text: str


class EventOut(BaseModel):
    v: int
    i: int
    kind: str
    payload: dict


class EventsResponse(BaseModel):
    session_id: str
    events: list[EventOut]


class RowOut(BaseModel):
    segment_id: str
    speaker: str | None
    text: str
    t_start: float
    t_end: float
    parent_id: str | None = None
    revised: bool = False


class SnapshotResponse(BaseModel):
    v: int
    session_id: str
    rows: list[RowOut]
    corrections_used: int
    correction_limit: int
    limit_reached: bool
    enrollments: dict[str, int]
    speakers: list[str]
    last_logical_index: int
