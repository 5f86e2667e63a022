"""Post-hoc validity filtering of collected ratings.

Two independently toggleable rules:
  timing            - a rating answered faster than a fraction of the
                      stimulus duration is dropped;
  human_vs_augmented - a participant who scored some unprocessed human
                       voice at or below some augmented (warped or
                       phase-reconstructed) stimulus has ALL ratings
                       dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..corpus import Stimulus
from ..ratings import RatingRecord

RULE_TIMING = "timing"
RULE_HUMAN_AUG = "human_vs_augmented"


@dataclass(frozen=True)
class ValidationRules:
    min_response_fraction: float = 0.5
    exclude_human_eq_augmented: bool = True
    timing_rule_enabled: bool = True
    human_comparison: str = "le"  # "le": human <= augmented; "eq": equality only

    def __post_init__(self):
        if not 0.0 < self.min_response_fraction <= 1.0:
            raise ValueError("min_response_fraction must lie in (0, 1]")
        if self.human_comparison not in ("le", "eq"):
            raise ValueError("human_comparison must be 'le' or 'eq'")


@dataclass(frozen=True)
class Exclusion:
    session_id: str
    stimulus_id: str
    rule: str
    detail: str


@dataclass
class ExclusionReport:
    n_input: int
    n_valid: int
    excluded: list[Exclusion] = field(default_factory=list)

    def count_by_rule(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.excluded:
            out[e.rule] = out.get(e.rule, 0) + 1
        return out


def filter_ratings(
    ratings: list[RatingRecord],
    stimuli: list[Stimulus],
    rules: ValidationRules = ValidationRules(),
) -> tuple[list[RatingRecord], ExclusionReport]:
    """Apply the timing rule, then the per-participant consistency rule.

    Pure function: identical inputs produce an identical report.  With both
    rules disabled the input passes through unchanged.
    """
    by_id = {s.stimulus_id: s for s in stimuli}
    for r in ratings:
        if r.stimulus_id not in by_id:
            raise ValueError(f"rating references unknown stimulus {r.stimulus_id!r}")

    exclusions: list[Exclusion] = []
    survivors: list[RatingRecord] = []
    if rules.timing_rule_enabled:
        for r in ratings:
            threshold_ms = rules.min_response_fraction * by_id[r.stimulus_id].duration_s * 1000.0
            if r.response_ms < threshold_ms:
                exclusions.append(
                    Exclusion(
                        r.session_id,
                        r.stimulus_id,
                        RULE_TIMING,
                        f"response {r.response_ms:.0f} ms < threshold {threshold_ms:.0f} ms",
                    )
                )
            else:
                survivors.append(r)
    else:
        survivors = list(ratings)

    if rules.exclude_human_eq_augmented:
        flagged: dict[str, str] = {}
        by_session: dict[str, list[RatingRecord]] = {}
        for r in survivors:
            by_session.setdefault(r.session_id, []).append(r)
        for session_id, session_ratings in by_session.items():
            human = [r.score for r in session_ratings if by_id[r.stimulus_id].is_human_voice]
            augmented = [r.score for r in session_ratings if by_id[r.stimulus_id].is_augmented]
            if not human or not augmented:
                continue
            if rules.human_comparison == "le":
                tripped = min(human) <= max(augmented)
            else:
                tripped = bool(set(human) & set(augmented))
            if tripped:
                flagged[session_id] = (
                    f"human voice scored {min(human)} vs augmented {max(augmented)}"
                )
        kept: list[RatingRecord] = []
        for r in survivors:
            if r.session_id in flagged:
                exclusions.append(
                    Exclusion(r.session_id, r.stimulus_id, RULE_HUMAN_AUG, flagged[r.session_id])
                )
            else:
                kept.append(r)
        survivors = kept

    report = ExclusionReport(n_input=len(ratings), n_valid=len(survivors), excluded=exclusions)
    return survivors, report
