"""MOS predictor over frozen speech-encoder embeddings."""

from .embio import (
    EMB_DIM,
    N_LAYERS,
    CheckpointFormatError,
    EmbeddingFormatError,
    read_embedding,
    write_embedding,
)
from .model import (
    AdamState,
    ModelParams,
    adam_step,
    batch_loss,
    draw_masks,
    init_params,
    loss_and_grads,
    predict,
    predict_batch,
    weighted_layer_average,
)
from .training import (
    Checkpoint,
    TrainConfig,
    evaluate,
    load_checkpoint,
    load_embedding_set,
    save_checkpoint,
    train,
    write_predictions,
)

__all__ = [
    "EMB_DIM",
    "N_LAYERS",
    "CheckpointFormatError",
    "EmbeddingFormatError",
    "read_embedding",
    "write_embedding",
    "AdamState",
    "ModelParams",
    "adam_step",
    "batch_loss",
    "draw_masks",
    "init_params",
    "loss_and_grads",
    "predict",
    "predict_batch",
    "weighted_layer_average",
    "Checkpoint",
    "TrainConfig",
    "evaluate",
    "load_checkpoint",
    "load_embedding_set",
    "save_checkpoint",
    "train",
    "write_predictions",
]
