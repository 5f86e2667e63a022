"""Frozen speech-encoder embedding extraction to EMB1 files."""

from .extract import (
    EMB_DIM,
    ENCODER_RATE,
    N_LAYERS,
    VARIANTS,
    EncoderUnavailable,
    ExtractorJob,
    embed_waveform,
    extract_embeddings,
    layer_frames,
    load_audio_16k,
    load_encoder,
    write_emb1,
)

__all__ = [
    "EMB_DIM",
    "ENCODER_RATE",
    "N_LAYERS",
    "VARIANTS",
    "EncoderUnavailable",
    "ExtractorJob",
    "embed_waveform",
    "extract_embeddings",
    "layer_frames",
    "load_audio_16k",
    "load_encoder",
    "write_emb1",
]
