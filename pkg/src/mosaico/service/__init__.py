"""Listening-test service: HTTP API, session store, validity filtering."""

from .app import ADMIN_TOKEN_ENV, create_app
from .filtering import (
    RULE_HUMAN_AUG,
    RULE_TIMING,
    ExclusionReport,
    ValidationRules,
    filter_ratings,
)
from .schemas import ParticipantInfo, RatingSubmission
from .store import (
    DuplicateRating,
    InventoryExhausted,
    RatingStore,
    SessionNotFound,
    StimulusNotIssued,
    assign_quality_tiers,
)

__all__ = [
    "ADMIN_TOKEN_ENV",
    "create_app",
    "RULE_HUMAN_AUG",
    "RULE_TIMING",
    "ExclusionReport",
    "ValidationRules",
    "filter_ratings",
    "ParticipantInfo",
    "RatingSubmission",
    "DuplicateRating",
    "InventoryExhausted",
    "RatingStore",
    "SessionNotFound",
    "StimulusNotIssued",
    "assign_quality_tiers",
]
