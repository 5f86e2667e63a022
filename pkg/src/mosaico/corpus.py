"""Stimulus manifests, augmentation planning, speaker-disjoint splits.

Manifests are JSONL, one stimulus per line.  Augmentation jobs apply the
spectral-warp and phase-reconstruction transforms from :mod:`mosaico.dsp`
to produce degraded variants; splits pack speaker/system groups greedily
so no speaker or system crosses a split boundary.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import dsp

GENDERS = {"M", "F"}
AUGMENTATIONS = {"none", "vtlp", "gl"}
HUMAN_SYSTEM = "human"

VTLP_FACTOR_RANGE = (0.9, 1.1)
VTLP_SPEAKERS = 4
GL_TTS_SPEAKERS = 1
GL_HUMAN_SPEAKERS = 1
SAMPLES_PER_AUGMENTED_SPEAKER = 100
GRIFFIN_LIM_ITERS = 32

SPLITS = ("train", "val", "test")


class ManifestError(ValueError):
    """Schema violation or referential break in a stimulus manifest."""


@dataclass(frozen=True)
class Stimulus:
    stimulus_id: str
    audio_path: str
    system_id: str
    speaker_id: str
    gender: str
    dialect: str
    text: str
    duration_s: float
    augmentation: str = "none"
    source_stimulus_id: str | None = None
    quality_tier: int | None = None

    def __post_init__(self):
        if not self.stimulus_id:
            raise ManifestError("stimulus_id must be nonempty")
        if self.gender not in GENDERS:
            raise ManifestError(f"gender must be one of {sorted(GENDERS)}, got {self.gender!r}")
        if self.augmentation not in AUGMENTATIONS:
            raise ManifestError(f"augmentation must be one of {sorted(AUGMENTATIONS)}")
        if self.duration_s <= 0:
            raise ManifestError(f"duration_s must be positive, got {self.duration_s}")
        if self.augmentation != "none" and not self.source_stimulus_id:
            raise ManifestError(
                f"augmented stimulus {self.stimulus_id} needs a source_stimulus_id"
            )
        if self.quality_tier is not None and not 1 <= self.quality_tier <= 5:
            raise ManifestError(f"quality_tier must lie in 1..5, got {self.quality_tier}")

    @property
    def is_human_voice(self) -> bool:
        return self.system_id == HUMAN_SYSTEM and self.augmentation == "none"

    @property
    def is_augmented(self) -> bool:
        return self.augmentation != "none"


REQUIRED_FIELDS = (
    "stimulus_id",
    "audio_path",
    "system_id",
    "speaker_id",
    "gender",
    "dialect",
    "text",
    "duration_s",
)


def _stimulus_from_obj(obj: dict, line_no: int) -> Stimulus:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {line_no}: expected a JSON object")
    missing = [f for f in REQUIRED_FIELDS if f not in obj]
    if missing:
        raise ManifestError(f"line {line_no}: missing field(s) {', '.join(missing)}")
    known = set(REQUIRED_FIELDS) | {"augmentation", "source_stimulus_id", "quality_tier"}
    unknown = set(obj) - known
    if unknown:
        raise ManifestError(f"line {line_no}: unknown field(s) {', '.join(sorted(unknown))}")
    try:
        return Stimulus(**obj)
    except ManifestError as exc:
        raise ManifestError(f"line {line_no}: {exc}") from exc
    except TypeError as exc:
        raise ManifestError(f"line {line_no}: {exc}") from exc


def load_manifest(path) -> list[Stimulus]:
    """Parse and validate a manifest; errors carry the offending line number."""
    out: list[Stimulus] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: invalid JSON ({exc})") from exc
            stim = _stimulus_from_obj(obj, line_no)
            if stim.stimulus_id in seen:
                raise ManifestError(f"line {line_no}: duplicate stimulus_id {stim.stimulus_id!r}")
            seen.add(stim.stimulus_id)
            out.append(stim)
    by_id = {s.stimulus_id: s for s in out}
    for stim in out:
        if stim.source_stimulus_id:
            source = by_id.get(stim.source_stimulus_id)
            if source is None:
                raise ManifestError(
                    f"stimulus {stim.stimulus_id}: dangling source_stimulus_id "
                    f"{stim.source_stimulus_id!r}"
                )
            # Augmentation references are depth 1: sources are originals.
            if source.augmentation != "none":
                raise ManifestError(
                    f"stimulus {stim.stimulus_id}: source {source.stimulus_id} is "
                    f"itself augmented"
                )
    return out


def save_manifest(path, stimuli: list[Stimulus]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for stim in stimuli:
            obj = {k: v for k, v in asdict(stim).items() if v is not None}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class AugmentationJob:
    source_stimulus_id: str
    method: str  # vtlp | gl
    new_stimulus_id: str
    new_speaker_id: str
    audio_path: str
    factor: float | None = None  # vtlp warp factor
    n_iters: int | None = None  # griffin-lim iterations


def _speakers_with_enough_samples(stimuli: list[Stimulus], human: bool) -> list[str]:
    counts: dict[str, int] = {}
    for s in stimuli:
        if s.augmentation != "none":
            continue
        if (s.system_id == HUMAN_SYSTEM) != human:
            continue
        counts[s.speaker_id] = counts.get(s.speaker_id, 0) + 1
    return sorted(sp for sp, n in counts.items() if n >= SAMPLES_PER_AUGMENTED_SPEAKER)


def plan_augmentation(stimuli: list[Stimulus], seed: int = 0) -> list[AugmentationJob]:
    """Deterministic augmentation plan: 4 TTS speakers get spectral warps
    (factor uniform in [0.9, 1.1] per sample), 1 TTS and 1 human speaker get
    phase reconstruction; 100 samples per selected speaker."""
    rng = np.random.default_rng(seed)
    tts = _speakers_with_enough_samples(stimuli, human=False)
    humans = _speakers_with_enough_samples(stimuli, human=True)
    if len(tts) < VTLP_SPEAKERS or len(humans) < GL_HUMAN_SPEAKERS:
        raise ManifestError(
            f"need >= {VTLP_SPEAKERS} TTS and >= {GL_HUMAN_SPEAKERS} human speakers "
            f"with >= {SAMPLES_PER_AUGMENTED_SPEAKER} samples; "
            f"found {len(tts)} TTS, {len(humans)} human"
        )
    vtlp_speakers = sorted(rng.choice(tts, size=VTLP_SPEAKERS, replace=False).tolist())
    remaining_tts = [sp for sp in tts if sp not in vtlp_speakers] or tts
    gl_tts = sorted(rng.choice(remaining_tts, size=GL_TTS_SPEAKERS, replace=False).tolist())
    gl_humans = sorted(rng.choice(humans, size=GL_HUMAN_SPEAKERS, replace=False).tolist())

    by_speaker: dict[str, list[Stimulus]] = {}
    for s in stimuli:
        if s.augmentation == "none":
            by_speaker.setdefault(s.speaker_id, []).append(s)

    def pick_samples(speaker: str) -> list[Stimulus]:
        pool = sorted(by_speaker[speaker], key=lambda s: s.stimulus_id)
        if len(pool) <= SAMPLES_PER_AUGMENTED_SPEAKER:
            return pool
        idx = rng.choice(len(pool), size=SAMPLES_PER_AUGMENTED_SPEAKER, replace=False)
        return [pool[i] for i in sorted(idx)]

    jobs: list[AugmentationJob] = []
    for speaker in vtlp_speakers:
        for src in pick_samples(speaker):
            new_id = f"{src.stimulus_id}-vtlp"
            jobs.append(
                AugmentationJob(
                    source_stimulus_id=src.stimulus_id,
                    method="vtlp",
                    new_stimulus_id=new_id,
                    new_speaker_id=f"{speaker}-vtlp",
                    audio_path=f"augmented/{new_id}.wav",
                    factor=float(rng.uniform(*VTLP_FACTOR_RANGE)),
                )
            )
    for speaker in gl_tts + gl_humans:
        for src in pick_samples(speaker):
            new_id = f"{src.stimulus_id}-gl"
            jobs.append(
                AugmentationJob(
                    source_stimulus_id=src.stimulus_id,
                    method="gl",
                    new_stimulus_id=new_id,
                    new_speaker_id=f"{speaker}-gl",
                    audio_path=f"augmented/{new_id}.wav",
                    n_iters=GRIFFIN_LIM_ITERS,
                )
            )
    return jobs


def save_jobs(path, jobs: list[AugmentationJob]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for job in jobs:
            obj = {k: v for k, v in asdict(job).items() if v is not None}
            fh.write(json.dumps(obj) + "\n")


def load_jobs(path) -> list[AugmentationJob]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(AugmentationJob(**json.loads(line)))
    return out


def run_augmentation(
    jobs: list[AugmentationJob],
    stimuli: list[Stimulus],
    audio_root,
    stft_params: dsp.StftParams = dsp.StftParams(),
) -> list[Stimulus]:
    """Execute jobs, writing one PCM16 WAV per job under ``audio_root``.

    Returns the new manifest entries (augmentation-tagged, source-linked).
    """
    root = Path(audio_root)
    by_id = {s.stimulus_id: s for s in stimuli}
    new_entries: list[Stimulus] = []
    for job in jobs:
        src = by_id.get(job.source_stimulus_id)
        if src is None:
            raise ManifestError(f"job references unknown stimulus {job.source_stimulus_id!r}")
        src_path = root / src.audio_path
        if not src_path.exists():
            raise FileNotFoundError(f"missing source audio {src_path}")
        wave = dsp.load_audio(src_path, target_rate=dsp.CANONICAL_RATE)
        if job.method == "vtlp":
            out_wave = dsp.vtlp(wave, job.factor, stft_params)
        elif job.method == "gl":
            mag = dsp.magnitude(wave, stft_params)
            out_wave = dsp.griffin_lim(mag, n_iters=job.n_iters or GRIFFIN_LIM_ITERS)
        else:
            raise ManifestError(f"unknown augmentation method {job.method!r}")
        out_path = root / job.audio_path
        out_path.parent.mkdir(parents=True, exist_ok=True)
        dsp.save_wav(out_path, out_wave)
        new_entries.append(
            Stimulus(
                stimulus_id=job.new_stimulus_id,
                audio_path=job.audio_path,
                system_id=src.system_id,
                speaker_id=job.new_speaker_id,
                gender=src.gender,
                dialect=src.dialect,
                text=src.text,
                duration_s=out_wave.duration_s,
                augmentation=job.method,
                source_stimulus_id=src.stimulus_id,
                quality_tier=src.quality_tier,
            )
        )
    return new_entries


@dataclass(frozen=True)
class SplitAssignment:
    by_stimulus: dict[str, str]  # stimulus_id -> train | val | test

    def ids_for(self, split: str) -> list[str]:
        return sorted(sid for sid, sp in self.by_stimulus.items() if sp == split)


def _disjoint_groups(stimuli: list[Stimulus]) -> list[list[Stimulus]]:
    """Connected components of the speaker/system co-occurrence graph.

    Augmented speakers share their source stimulus's speaker and system ids
    through the source link, so they land in the source's component.
    """
    parent: dict[str, str] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    by_id = {s.stimulus_id: s for s in stimuli}
    for s in stimuli:
        union(f"spk:{s.speaker_id}", f"sys:{s.system_id}")
        if s.source_stimulus_id and s.source_stimulus_id in by_id:
            union(f"spk:{s.speaker_id}", f"spk:{by_id[s.source_stimulus_id].speaker_id}")
    groups: dict[str, list[Stimulus]] = {}
    for s in stimuli:
        groups.setdefault(find(f"spk:{s.speaker_id}"), []).append(s)
    return [sorted(g, key=lambda s: s.stimulus_id) for g in groups.values()]


def split_by_speaker(
    stimuli: list[Stimulus],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitAssignment:
    """Greedy packing of speaker/system groups toward the target ratios.

    Deterministic given the seed; raises if the result ever violates
    speaker or system disjointness.
    """
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    groups = _disjoint_groups(stimuli)
    if len(groups) < 3:
        raise ManifestError(f"need at least 3 speaker groups to split, found {len(groups)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(groups))
    groups = [groups[i] for i in order]
    groups.sort(key=len, reverse=True)  # stable: seed-shuffled ties

    total = sum(len(g) for g in groups)
    targets = [r * total for r in ratios]
    assigned = [0.0, 0.0, 0.0]
    by_stimulus: dict[str, str] = {}
    for group in groups:
        # Relative deficit: an empty split always outranks an overfull one,
        # so every split receives a group once three exist.
        deficits = [(targets[i] - assigned[i]) / targets[i] for i in range(3)]
        best = max(range(3), key=lambda i: (deficits[i], -i))
        assigned[best] += len(group)
        for s in group:
            by_stimulus[s.stimulus_id] = SPLITS[best]

    assignment = SplitAssignment(by_stimulus)
    check_split_disjoint(stimuli, assignment)
    return assignment


def check_split_disjoint(stimuli: list[Stimulus], assignment: SplitAssignment) -> None:
    """Structural invariant: no speaker or system id spans two splits."""
    speaker_split: dict[str, str] = {}
    system_split: dict[str, str] = {}
    for s in stimuli:
        split = assignment.by_stimulus.get(s.stimulus_id)
        if split is None:
            raise ManifestError(f"stimulus {s.stimulus_id} missing from split assignment")
        for key, table in ((s.speaker_id, speaker_split), (s.system_id, system_split)):
            if table.setdefault(key, split) != split:
                raise ManifestError(f"{key!r} appears in both {table[key]} and {split}")


def save_split(path, assignment: SplitAssignment) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid in sorted(assignment.by_stimulus):
            fh.write(json.dumps({"stimulus_id": sid, "split": assignment.by_stimulus[sid]}) + "\n")


def load_split(path) -> SplitAssignment:
    table: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj["split"] not in SPLITS:
                raise ManifestError(f"unknown split label {obj['split']!r}")
            table[obj["stimulus_id"]] = obj["split"]
    return SplitAssignment(table)


@dataclass(frozen=True)
class CorpusStats:
    n_stimuli: int
    n_speakers: int
    total_minutes: float
    duration_mean_s: float
    duration_sd_s: float
    words_mean: float
    words_sd: float
    voices_by_gender: dict[str, int]
    voices_by_dialect: dict[str, int]
    stimuli_by_system: dict[str, int]
    n_ratings: int = 0
    n_rated_stimuli: int = 0


def corpus_stats(stimuli: list[Stimulus], ratings=None) -> CorpusStats:
    """Descriptive statistics; word counts by whitespace tokenization."""
    if not stimuli:
        raise ManifestError("empty manifest")
    durations = np.array([s.duration_s for s in stimuli])
    words = np.array([len(s.text.split()) for s in stimuli], dtype=float)
    speakers: dict[str, Stimulus] = {}
    for s in stimuli:
        speakers.setdefault(s.speaker_id, s)
    by_gender: dict[str, int] = {}
    by_dialect: dict[str, int] = {}
    for sp in speakers.values():
        by_gender[sp.gender] = by_gender.get(sp.gender, 0) + 1
        by_dialect[sp.dialect] = by_dialect.get(sp.dialect, 0) + 1
    by_system: dict[str, int] = {}
    for s in stimuli:
        by_system[s.system_id] = by_system.get(s.system_id, 0) + 1
    n_ratings = len(ratings) if ratings is not None else 0
    n_rated = len({r.stimulus_id for r in ratings}) if ratings is not None else 0
    return CorpusStats(
        n_stimuli=len(stimuli),
        n_speakers=len(speakers),
        total_minutes=float(durations.sum() / 60.0),
        duration_mean_s=float(durations.mean()),
        duration_sd_s=float(durations.std(ddof=1)) if len(durations) > 1 else 0.0,
        words_mean=float(words.mean()),
        words_sd=float(words.std(ddof=1)) if len(words) > 1 else 0.0,
        voices_by_gender=by_gender,
        voices_by_dialect=by_dialect,
        stimuli_by_system=by_system,
        n_ratings=n_ratings,
        n_rated_stimuli=n_rated,
    )
