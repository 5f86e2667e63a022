"""Rating records and their JSONL serialization.

One line per rating; exported lines additionally carry the participant's
demographics so downstream analysis needs no join.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class RatingRecord:
    session_id: str
    stimulus_id: str
    score: int
    listen_ms: float
    response_ms: float
    batch_index: int
    timestamp: str  # ISO-8601 UTC
    age: int | None = None
    gender: str | None = None
    nationality: str | None = None
    familiarity: int | None = None
    normal_hearing: bool | None = None

    def __post_init__(self):
        if not 1 <= self.score <= 5:
            raise ValueError(f"score must lie in 1..5, got {self.score}")
        if self.listen_ms < 0 or self.response_ms < 0:
            raise ValueError("listen_ms and response_ms must be non-negative")


def save_ratings(path, ratings: list[RatingRecord]) -> None:
    """Write ratings as JSONL in stable timestamp order."""
    ordered = sorted(ratings, key=lambda r: (r.timestamp, r.session_id, r.stimulus_id))
    with open(path, "w", encoding="utf-8") as fh:
        for r in ordered:
            obj = {k: v for k, v in asdict(r).items() if v is not None}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_ratings(path) -> list[RatingRecord]:
    out: list[RatingRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(RatingRecord(**json.loads(line)))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
    return out


def mos_labels(ratings: list[RatingRecord]) -> dict[str, float]:
    """Per-stimulus MOS: mean score over all ratings of that stimulus."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for r in ratings:
        sums[r.stimulus_id] = sums.get(r.stimulus_id, 0.0) + r.score
        counts[r.stimulus_id] = counts.get(r.stimulus_id, 0) + 1
    return {sid: sums[sid] / counts[sid] for sid in sums}
