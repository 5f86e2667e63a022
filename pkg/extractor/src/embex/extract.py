"""Run a frozen speech encoder over corpus audio and emit EMB1 files.

For every stimulus in the manifest: load the audio at 16 kHz mono, collect
the encoder's projected local-feature output plus all 12 transformer block
outputs, average each over time, and write the resulting 13 x 768 tensor
as ``<stimulus_id>.emb1`` (write-temp then rename, so files are atomic).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

ENCODER_RATE = 16_000
N_LAYERS = 13
EMB_DIM = 768

VARIANTS = {
    "base": "facebook/wav2vec2-base",
    "asr-960h": "facebook/wav2vec2-base-960h",
}

_EMB_HEADER = struct.Struct("<4sHHII")


class EncoderUnavailable(RuntimeError):
    """The requested encoder weights could not be loaded."""


@dataclass(frozen=True)
class ExtractorJob:
    manifest_path: str
    variant: str
    out_dir: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}, got {self.variant!r}")


def write_emb1(path, layers: np.ndarray) -> None:
    """Serialize a (13, 768) tensor in the EMB1 interchange format."""
    layers = np.asarray(layers)
    if layers.shape != (N_LAYERS, EMB_DIM):
        raise ValueError(f"expected ({N_LAYERS}, {EMB_DIM}), got {layers.shape}")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_EMB_HEADER.pack(b"EMB1", 1, N_LAYERS, EMB_DIM, 0x1))
        fh.write(layers.astype("<f4").tobytes(order="C"))
    tmp.replace(path)


def load_audio_16k(path) -> np.ndarray:
    """Mono float audio at the encoder rate, scaled to [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.size == 0:
        raise ValueError(f"zero-length audio in {path}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != ENCODER_RATE:
        g = math.gcd(rate, ENCODER_RATE)
        samples = resample_poly(samples, ENCODER_RATE // g, rate // g)
    return np.clip(samples, -1.0, 1.0)


def load_encoder(variant: str, model_dir: str | None = None):
    """Load the frozen encoder for a variant, from a local dir if given."""
    try:
        from transformers import Wav2Vec2Model
    except ImportError as exc:
        raise EncoderUnavailable(f"transformers is not installed: {exc}") from exc
    source = model_dir or VARIANTS[variant]
    try:
        encoder = Wav2Vec2Model.from_pretrained(source)
    except Exception as exc:
        raise EncoderUnavailable(f"could not load encoder from {source!r}: {exc}") from exc
    encoder.eval()
    return encoder


def layer_frames(encoder, samples: np.ndarray) -> np.ndarray:
    """All 13 per-frame hidden states, (13, frames, 768), inference mode."""
    import torch

    x = torch.from_numpy(np.asarray(samples, dtype=np.float32))[None, :]
    with torch.no_grad():
        out = encoder(x, output_hidden_states=True)
    states = out.hidden_states
    if len(states) != N_LAYERS:
        raise EncoderUnavailable(f"encoder produced {len(states)} hidden states, need {N_LAYERS}")
    return np.stack([s[0].numpy() for s in states])


def embed_waveform(encoder, samples: np.ndarray) -> np.ndarray:
    """Time-averaged layer embeddings, (13, 768) float32."""
    frames = layer_frames(encoder, samples)
    if frames.shape[2] != EMB_DIM:
        raise EncoderUnavailable(f"encoder hidden size {frames.shape[2]} != {EMB_DIM}")
    return frames.mean(axis=1).astype(np.float32)


def read_manifest_entries(path) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            for field in ("stimulus_id", "audio_path"):
                if field not in obj:
                    raise ValueError(f"{path}: line {line_no}: missing {field!r}")
            entries.append(obj)
    return entries


def extract_embeddings(
    job: ExtractorJob,
    audio_root,
    encoder=None,
    model_dir: str | None = None,
    overwrite: bool = False,
) -> list[Path]:
    """One EMB1 file per manifest stimulus; returns the written paths."""
    entries = read_manifest_entries(job.manifest_path)
    if encoder is None:
        encoder = load_encoder(job.variant, model_dir)
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    audio_root = Path(audio_root)
    written = []
    for entry in entries:
        out_path = out_dir / f"{entry['stimulus_id']}.emb1"
        if out_path.exists() and not overwrite:
            written.append(out_path)
            continue
        samples = load_audio_16k(audio_root / entry["audio_path"])
        write_emb1(out_path, embed_waveform(encoder, samples))
        written.append(out_path)
    return written
