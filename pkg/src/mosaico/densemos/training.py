"""Training loop, evaluation, and checkpointing for the MOS predictor."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import stats
from . import embio, model


@dataclass(frozen=True)
class TrainConfig:
    lr_alpha: float = 0.001
    lr_mlp: float = 0.0001
    dropout_p: float = 0.6
    patience: int = 40
    batch_size: int = 32
    max_epochs: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.lr_alpha <= 0 or self.lr_mlp <= 0:
            raise ValueError("learning rates must be positive")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("patience, batch_size, and max_epochs must be positive")


@dataclass
class Checkpoint:
    params: model.ModelParams
    config: TrainConfig
    history: list[dict] = field(default_factory=list)

    @property
    def best_val_loss(self) -> float:
        return min(h["val_loss"] for h in self.history)


def train(
    train_embs: np.ndarray,
    train_labels: np.ndarray,
    val_embs: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
) -> Checkpoint:
    """Minibatch ADAM training with early stopping on validation loss.

    Deterministic given the config seed: one RNG drives the initial
    parameters, per-epoch shuffles, and dropout masks.  Returns the
    parameters from the best-validation epoch.
    """
    if len(train_labels) == 0 or len(val_labels) == 0:
        raise ValueError("train and validation sets must be nonempty")
    rng = np.random.default_rng(config.seed)
    params = model.init_params(seed=config.seed)
    state = model.AdamState.fresh()
    n = len(train_labels)

    best_params = params.copy()
    best_val = np.inf
    epochs_since_best = 0
    history: list[dict] = []

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            masks = model.draw_masks(rng, len(idx), config.dropout_p)
            loss, grads = model.loss_and_grads(
                params, train_embs[idx], train_labels[idx], masks
            )
            params, state = model.adam_step(
                params, grads, state, lr_alpha=config.lr_alpha, lr_mlp=config.lr_mlp
            )
            epoch_loss += loss * len(idx)
        train_loss = epoch_loss / n
        val_loss = model.batch_loss(params, val_embs, val_labels)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break
    return Checkpoint(params=best_params, config=config, history=history)


def evaluate(
    checkpoint: Checkpoint,
    embs: np.ndarray,
    labels: np.ndarray,
    n_boot: int = 1000,
    seed: int = 0,
) -> tuple[stats.Metrics, np.ndarray]:
    """Eval-mode predictions and regression metrics with bootstrap CIs."""
    if len(labels) == 0:
        raise ValueError("empty test set")
    preds = model.predict_batch(checkpoint.params, embs)
    metrics = stats.metrics_with_ci(preds, labels, n_boot=n_boot, seed=seed)
    return metrics, preds


def write_predictions(path, stimulus_ids, preds, labels) -> None:
    """One JSON object per stimulus: id, prediction, label."""
    with open(path, "w", encoding="utf-8") as fh:
        for sid, pred, label in zip(stimulus_ids, preds, labels):
            fh.write(
                json.dumps(
                    {"stimulus_id": sid, "prediction": float(pred), "mos": float(label)}
                )
                + "\n"
            )


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    """Binary parameter file plus a JSON sidecar with config and history."""
    vec = checkpoint.params.as_vector()
    embio.write_param_vector(path, vec)
    sidecar = {
        "config": asdict(checkpoint.config),
        "history": checkpoint.history,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    expected = model.init_params(0).count()
    vec = embio.read_param_vector(path, expected)
    params = model.ModelParams.from_vector(vec)
    sidecar_path = Path(str(path) + ".json")
    config = TrainConfig()
    history: list[dict] = []
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        config = TrainConfig(**sidecar.get("config", {}))
        history = sidecar.get("history", [])
    return Checkpoint(params=params, config=config, history=history)


def load_embedding_set(emb_dir, stimulus_ids) -> np.ndarray:
    """Stack <id>.emb1 files from a directory into (n, 13, 768) float64."""
    emb_dir = Path(emb_dir)
    out = np.empty((len(stimulus_ids), embio.N_LAYERS, embio.EMB_DIM))
    for i, sid in enumerate(stimulus_ids):
        path = emb_dir / f"{sid}.emb1"
        if not path.exists():
            raise FileNotFoundError(f"missing embedding file for stimulus {sid!r}: {path}")
        out[i] = embio.read_embedding(path)
    return out
