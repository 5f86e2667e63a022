"""Spanish TTS naturalness platform: corpus tooling, listening-test service,
agreement statistics, and a MOS predictor over frozen speech embeddings."""

__version__ = "0.1.0"
