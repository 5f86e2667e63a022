"""Session state, quality-tiered batch planning, and rating persistence.

Framework-free core behind the HTTP layer.  Each batch draws one stimulus
from each of the five quality tiers (without replacement within the
session, falling back to the nearest nonempty tier), shuffled before
presentation so tier order never leaks.
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from ..corpus import Stimulus
from ..ratings import RatingRecord
from .schemas import ParticipantInfo, RatingSubmission

logger = logging.getLogger(__name__)

N_TIERS = 5
BATCH_SIZE = 5


class SessionNotFound(KeyError):
    pass


class StimulusNotIssued(ValueError):
    pass


class DuplicateRating(ValueError):
    pass


class InventoryExhausted(RuntimeError):
    pass


def assign_quality_tiers(
    stimuli: list[Stimulus],
    pilot_scores: dict[str, float] | None = None,
    system_priors: dict[str, float] | None = None,
) -> dict[str, int]:
    """Five quality tiers per stimulus (1 = worst expected, 5 = best).

    Priority: an explicit quality_tier on the stimulus, then an
    equal-frequency quantile bin over pilot/system prior scores, then the
    middle tier for stimuli with no prior at all.
    """
    pilot_scores = pilot_scores or {}
    system_priors = system_priors or {}
    tiers: dict[str, int] = {}
    scored: list[tuple[float, str]] = []
    for s in stimuli:
        if s.quality_tier is not None:
            tiers[s.stimulus_id] = s.quality_tier
        elif s.stimulus_id in pilot_scores:
            scored.append((pilot_scores[s.stimulus_id], s.stimulus_id))
        elif s.system_id in system_priors:
            scored.append((system_priors[s.system_id], s.stimulus_id))
        else:
            tiers[s.stimulus_id] = 3
    if scored:
        scored.sort()  # by (score, stimulus_id): deterministic tie-break
        chunks = np.array_split(np.arange(len(scored)), N_TIERS)
        for tier_index, chunk in enumerate(chunks):
            for i in chunk:
                tiers[scored[i][1]] = tier_index + 1
    return tiers


@dataclass
class SessionState:
    session_id: str
    info: ParticipantInfo
    rng: np.random.Generator
    issued: dict[str, int] = field(default_factory=dict)  # stimulus_id -> batch_index
    rated: set[str] = field(default_factory=set)
    batch_count: int = 0
    batches: list[list[str]] = field(default_factory=list)


class RatingStore:
    """All mutable service state; one lock serializes mutations."""

    def __init__(
        self,
        stimuli: list[Stimulus],
        tiers: dict[str, int] | None = None,
        seed: int | None = None,
        persist_path=None,
    ):
        self.stimuli = {s.stimulus_id: s for s in stimuli}
        self.tiers = tiers if tiers is not None else assign_quality_tiers(stimuli)
        self.by_tier: dict[int, list[str]] = {t: [] for t in range(1, N_TIERS + 1)}
        for sid in sorted(self.stimuli):
            self.by_tier[self.tiers.get(sid, 3)].append(sid)
        self.seed = seed
        self.persist_path = persist_path
        self.sessions: dict[str, SessionState] = {}
        self.ratings: list[RatingRecord] = []
        self._counter = 0
        self._lock = threading.RLock()

    def create_session(self, info: ParticipantInfo) -> str:
        with self._lock:
            self._counter += 1
            if self.seed is None:
                rng = np.random.default_rng()
                token = secrets.token_hex(6)
            else:
                rng = np.random.default_rng([self.seed, self._counter])
                token = f"{rng.integers(0, 16**12):012x}"
            session_id = f"sess-{self._counter:05d}-{token}"
            self.sessions[session_id] = SessionState(session_id, info, rng)
            return session_id

    def _session(self, session_id: str) -> SessionState:
        if session_id not in self.sessions:
            raise SessionNotFound(session_id)
        return self.sessions[session_id]

    def next_batch(self, session_id: str) -> tuple[int, list[Stimulus]]:
        """One stimulus per quality tier, unseen in this session, shuffled."""
        with self._lock:
            sess = self._session(session_id)
            chosen: list[str] = []
            for tier in range(1, N_TIERS + 1):
                sid = self._draw_from_tier(sess, tier, exclude=chosen)
                if sid is not None:
                    chosen.append(sid)
            if not chosen:
                raise InventoryExhausted("no unrated stimuli left for this session")
            order = sess.rng.permutation(len(chosen))
            chosen = [chosen[i] for i in order]
            batch_index = sess.batch_count
            sess.batch_count += 1
            sess.batches.append(chosen)
            for sid in chosen:
                sess.issued.setdefault(sid, batch_index)
            return batch_index, [self.stimuli[sid] for sid in chosen]

    def _draw_from_tier(self, sess: SessionState, tier: int, exclude: list[str]) -> str | None:
        # Nearest-nonempty fallback: tier, then +-1, +-2, ... by distance.
        for dist in range(N_TIERS):
            for cand in (tier - dist, tier + dist) if dist else (tier,):
                if not 1 <= cand <= N_TIERS:
                    continue
                pool = [
                    sid
                    for sid in self.by_tier[cand]
                    if sid not in sess.issued and sid not in exclude
                ]
                if pool:
                    if cand != tier:
                        logger.info(
                            "session %s: tier %d exhausted, drew from tier %d",
                            sess.session_id, tier, cand,
                        )
                    return pool[int(sess.rng.integers(0, len(pool)))]
        return None

    def submit_rating(self, session_id: str, sub: RatingSubmission) -> RatingRecord:
        with self._lock:
            sess = self._session(session_id)
            if sub.stimulus_id not in self.stimuli:
                raise StimulusNotIssued(f"unknown stimulus {sub.stimulus_id!r}")
            if sub.stimulus_id not in sess.issued:
                raise StimulusNotIssued(
                    f"stimulus {sub.stimulus_id!r} was not issued to this session"
                )
            if sub.stimulus_id in sess.rated:
                raise DuplicateRating(f"stimulus {sub.stimulus_id!r} already rated")
            record = RatingRecord(
                session_id=session_id,
                stimulus_id=sub.stimulus_id,
                score=sub.score,
                listen_ms=sub.listen_ms,
                response_ms=sub.response_ms,
                batch_index=sess.issued[sub.stimulus_id],
                timestamp=datetime.now(timezone.utc).isoformat(),
                age=sess.info.age,
                gender=sess.info.gender,
                nationality=sess.info.nationality,
                familiarity=sess.info.familiarity,
                normal_hearing=sess.info.self_reported_normal_hearing,
            )
            sess.rated.add(sub.stimulus_id)
            self.ratings.append(record)
            if self.persist_path is not None:
                line = json.dumps(
                    {k: v for k, v in asdict(record).items() if v is not None},
                    ensure_ascii=False,
                )
                with open(self.persist_path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            return record

    def export_jsonl(self) -> str:
        """One line per rating with demographics, stable timestamp order."""
        with self._lock:
            ordered = sorted(
                self.ratings, key=lambda r: (r.timestamp, r.session_id, r.stimulus_id)
            )
            lines = [
                json.dumps({k: v for k, v in asdict(r).items() if v is not None},
                           ensure_ascii=False)
                for r in ordered
            ]
        return "\n".join(lines) + ("\n" if lines else "")
