"""Two-phase training loop: wide-range pretraining then protocol fine-tuning.

Monitors validation RMSE with a reduce-on-plateau schedule, records a
per-epoch metric history, and aborts on divergence. Checkpoints are JSON
containers (name -> shape -> row-major values) so they stay portable and
diffable; metric history serializes to CSV.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import augment_clip
from .data import batch_inputs, labels_of
from .nn import HardnessModel, ModelConfig, eq1_loss
from .optim import AdamW, ReduceLROnPlateau
from .stats import r2_score, rmse, spearman


@dataclass(frozen=True)
class TrainConfig:
    pretrain_epochs: int = 80
    finetune_epochs: int = 15
    batch_size: int = 8
    lr_early: float = 5e-5
    lr_late: float = 1e-3
    weight_decay: float = 1e-4
    plateau_factor: float = 0.2
    plateau_patience: int = 2
    t: int = 2
    seed: int = 0
    val_fraction: float = 0.2
    # photometric jitter hardens the wide-range pretrain features; the
    # fine-tune phase calibrates absolute amplitude on protocol data, which
    # +-10% brightness/contrast scaling would blur by ~15 HA equivalent
    augment_pretrain: bool = True
    augment_finetune: bool = False

    def __post_init__(self):
        if min(self.pretrain_epochs, self.finetune_epochs) < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.lr_early <= 0 or self.lr_late <= 0:
            raise ValueError("learning rates must be positive")
        if self.lr_late <= self.lr_early:
            raise ValueError("late layers must use the higher learning rate")
        if self.t not in (2, 4):
            raise ValueError("T must be 2 or 4")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    phase: str
    train_loss: float
    val_rmse: float
    val_r2: float
    val_rho: float


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history


@dataclass
class TrainResult:
    model: HardnessModel
    history: list = field(default_factory=list)
    pretrain_metrics: dict = None
    finetune_metrics: dict = None
    wall_seconds: float = 0.0


def evaluate(model: HardnessModel, samples, t: int) -> dict:
    """Prediction metrics; r2/rho are NaN when labels are degenerate.

    A single-object validation split has constant labels, which leaves rank
    correlation and explained variance undefined; a NaN entry in the history
    is more useful there than an aborted run.
    """
    preds = model.predict(batch_inputs([s.clip for s in samples], t))
    labels = labels_of(samples)
    out = {"rmse": rmse(preds, labels), "predictions": preds, "labels": labels}
    for key, fn in (("r2", r2_score), ("rho", spearman)):
        try:
            out[key] = fn(preds, labels)
        except ValueError:
            out[key] = float("nan")
    return out


def _split(samples, val_fraction: float, rng) -> tuple:
    order = rng.permutation(len(samples))
    n_val = max(2, int(round(len(samples) * val_fraction)))
    val_idx = set(order[:n_val].tolist())
    train = [samples[i] for i in order[n_val:]]
    val = [samples[i] for i in order[:n_val]]
    return train, val


def _run_phase(model, samples, phase, epochs, config, history, epoch_base, augment):
    """One training phase over `samples`; returns epochs consumed.

    Each phase gets a fresh optimizer and scheduler: fine-tuning restarts
    from the configured learning rates rather than inheriting whatever the
    pretraining plateau had decayed them to, and stale Adam moments from the
    previous data distribution never leak into the new one.

    The phase ends on its best validation epoch, not its last: late epochs
    wander around the optimum and which one the loop happens to stop on is
    seed lottery.
    """
    if epochs == 0 or not samples:
        return 0
    groups = model.param_groups()
    optimizer = AdamW(
        {
            "early": (groups["early"], config.lr_early),
            "late": (groups["late"], config.lr_late),
        },
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng((config.seed, epoch_base, 17))
    train, val = _split(samples, config.val_fraction, rng)
    scheduler = ReduceLROnPlateau(
        optimizer, factor=config.plateau_factor, patience=config.plateau_patience
    )
    initial_loss = None
    over_budget = 0
    best_rmse = float("inf")
    best_state = None
    for epoch in range(epochs):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), config.batch_size):
            chunk = [train[i] for i in order[start : start + config.batch_size]]
            if len(chunk) < 2:
                continue  # Eq. 1 variance needs at least two predictions
            clips = [s.clip for s in chunk]
            if augment:
                clips = [
                    augment_clip(c, (config.seed, epoch_base + epoch, start, j))
                    for j, c in enumerate(clips)
                ]
            x = batch_inputs(clips, config.t)
            y = np.array([s.hardness for s in chunk])
            model.zero_grad()
            loss = eq1_loss(model.forward(x, training=True, rng=rng), y)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.data))
        mean_loss = float(np.mean(losses))
        metrics = evaluate(model, val, config.t)
        history.append(
            EpochRecord(
                epoch=epoch_base + epoch,
                phase=phase,
                train_loss=mean_loss,
                val_rmse=metrics["rmse"],
                val_r2=metrics["r2"],
                val_rho=metrics["rho"],
            )
        )
        scheduler.step(metrics["rmse"])
        if metrics["rmse"] < best_rmse:
            best_rmse = metrics["rmse"]
            best_state = {
                name: p.data.copy() for name, p in model.named_parameters().items()
            }
        if initial_loss is None:
            initial_loss = mean_loss
        over_budget = over_budget + 1 if mean_loss > 10 * initial_loss else 0
        if over_budget >= 3:
            raise TrainingDiverged(
                f"{phase} loss above 10x initial for 3 epochs", history
            )
    if best_state is not None:
        model.load_state_dict(best_state)
    return epochs


def train(
    pretrain_set,
    finetune_set,
    config: TrainConfig = TrainConfig(),
    model_config: ModelConfig = ModelConfig(),
) -> TrainResult:
    """Pretrain then fine-tune; either set may be empty to skip a phase."""
    t0 = time.time()
    model = HardnessModel(model_config, seed=config.seed)
    result = TrainResult(model=model)
    used = _run_phase(
        model, pretrain_set, "pretrain", config.pretrain_epochs, config,
        result.history, 0, config.augment_pretrain,
    )
    if pretrain_set:
        result.pretrain_metrics = evaluate(model, pretrain_set, config.t)
    _run_phase(
        model, finetune_set, "finetune", config.finetune_epochs, config,
        result.history, used, config.augment_finetune,
    )
    if finetune_set:
        result.finetune_metrics = evaluate(model, finetune_set, config.t)
    result.wall_seconds = time.time() - t0
    return result


def leave_one_object_out(pretrain_set, finetune_set, config: TrainConfig) -> list:
    """7-fold protocol: fine-tune on 6 reference objects, test on the 7th."""
    object_ids = sorted({s.object_id for s in finetune_set})
    folds = []
    for held in object_ids:
        train_samples = [s for s in finetune_set if s.object_id != held]
        test_samples = [s for s in finetune_set if s.object_id == held]
        result = train(pretrain_set, train_samples, config)
        metrics = evaluate(result.model, test_samples, config.t)
        folds.append({"held_out": held, "rmse": metrics["rmse"], "r2": metrics["r2"]})
    return folds


# -- persistence ----------------------------------------------------------


def save_checkpoint(path, model: HardnessModel, config: TrainConfig) -> None:
    payload = {
        "format": "presslab-checkpoint-v1",
        "model_config": model.config.to_json(),
        "t": config.t,
        "seed": config.seed,
        "params": {
            name: {"shape": list(p.data.shape), "values": p.data.ravel().tolist()}
            for name, p in model.named_parameters().items()
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path) -> tuple:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "presslab-checkpoint-v1":
        raise ValueError("not a recognized checkpoint file")
    model = HardnessModel(ModelConfig.from_json(payload["model_config"]))
    state = {
        name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    model.load_state_dict(state)
    return model, {"t": int(payload["t"]), "seed": int(payload.get("seed", 0))}


def write_history_csv(path, history) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "phase", "train_loss", "val_rmse", "val_r2", "val_rho"])
        for rec in history:
            writer.writerow(
                [rec.epoch, rec.phase, rec.train_loss, rec.val_rmse, rec.val_r2, rec.val_rho]
            )


def read_history_csv(path) -> list:
    rows = []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            rows.append(
                EpochRecord(
                    epoch=int(row["epoch"]),
                    phase=row["phase"],
                    train_loss=float(row["train_loss"]),
                    val_rmse=float(row["val_rmse"]),
                    val_r2=float(row["val_r2"]),
                    val_rho=float(row["val_rho"]),
                )
            )
    return rows
