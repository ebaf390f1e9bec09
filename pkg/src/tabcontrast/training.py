"""Pretraining and fine-tuning loops for the four method arms.

The pretraining loop optimizes the encoder and projection head on the
contrastive objective over corrupted views.  The class-conditioned arm
recomputes pseudo-labels at the top of every epoch and retrains the
classification head on labeled rows at a fixed interval; the oracle arm
runs the same machinery with ground-truth labels for every training row.
Fine-tuning freezes the encoder and trains only the classification head.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .contrastive import ntxent_loss
from .corruption import SUBSET_MODES, CorruptionContext, CorruptionPlan, corrupt_batch
from .correlation import ImportanceProfile
from .neural import (
    AdamState,
    MlpSpec,
    ModelParams,
    backward_encoder_head,
    cross_entropy,
    forward_encoder,
    forward_head,
    init_model,
    optimizer_step,
    softmax,
)
from .evaluation import MetricError, accuracy as accuracy_metric, auroc as auroc_metric
from .tabular import Encoder1Hot, SplitSpec, Table, fit_encoder

METHODS = ("no_pretrain", "random", "class_conditioned", "oracle")
STREAM_NAMES = ("init", "corrupt", "head", "finetune")


class DivergenceError(RuntimeError):
    """Non-finite loss during pretraining; carries the 1-based epoch."""

    def __init__(self, epoch: int, message: str):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    method: str = "class_conditioned"
    subset_mode: str = "uniform"
    pretrain_epochs: int = 500
    finetune_epochs: int = 100
    pseudo_update_interval: int = 10
    head_refresh_epochs: int = 5
    batch_size: int = 128
    p: float = 0.6
    tau: float = 1.0
    learning_rate: float = 1e-3
    head_learning_rate: float = 1e-2
    hidden_width: int = 256
    encoder_hidden_layers: int = 4
    projection_width: int = 256
    seed: int = 0
    warm_start_head: bool = False
    reinit_head_at_refresh: bool = False
    force_truth_pseudo_labels: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.subset_mode not in SUBSET_MODES:
            raise ValueError(f"unknown subset_mode {self.subset_mode!r}")
        if self.pretrain_epochs < 1:
            raise ValueError("pretrain_epochs must be positive")
        if self.finetune_epochs < 0:
            raise ValueError("finetune_epochs must be non-negative")
        if self.pseudo_update_interval < 1:
            raise ValueError("pseudo_update_interval must be positive")
        if self.pretrain_epochs % self.pseudo_update_interval != 0:
            raise ValueError("pseudo_update_interval must divide pretrain_epochs")
        if self.head_refresh_epochs < 1:
            raise ValueError("head_refresh_epochs must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("corruption fraction p must lie in (0, 1]")
        if self.tau <= 0.0:
            raise ValueError("temperature tau must be positive")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.head_learning_rate <= 0.0:
            raise ValueError("head_learning_rate must be positive")

    @property
    def value_mode(self) -> str:
        if self.method in ("class_conditioned", "oracle"):
            return "class_conditioned"
        return "table_uniform"


@dataclass(frozen=True)
class PseudoLabelState:
    """Per-training-row class assignments, aligned with split.train_idx."""

    labels: np.ndarray
    is_ground_truth: np.ndarray

    def validate(self, class_count: int) -> None:
        if self.labels.shape != self.is_ground_truth.shape:
            raise ValueError("labels and source mask must align")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= class_count):
            raise ValueError("pseudo-label out of class range")


@dataclass(frozen=True)
class RunRecord:
    dataset: str
    method: str
    subset_mode: str
    seed: int
    accuracy: float
    auroc: float
    loss_curve: tuple[float, ...]
    manifest_hash: str = ""


@dataclass(frozen=True)
class FinetuneResult:
    accuracy: float
    auroc: float


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for init, corruption, head refresh, fine-tune.

    Spawned from one seed sequence so consuming draws in one phase never
    shifts another phase's stream.
    """
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(c) for name, c in zip(STREAM_NAMES, children)}


def model_spec(cfg: TrainConfig, input_width: int, class_count: int) -> MlpSpec:
    return MlpSpec(
        input_width=input_width,
        class_count=class_count,
        hidden_width=cfg.hidden_width,
        encoder_hidden_layers=cfg.encoder_hidden_layers,
        projection_width=cfg.projection_width,
    )


def _labeled_mask(split: SplitSpec) -> np.ndarray:
    return np.isin(split.train_idx, split.labeled_idx)


def _pseudo_from_logits(
    logits: np.ndarray, truth: np.ndarray, labeled_mask: np.ndarray
) -> PseudoLabelState:
    # np.argmax already breaks ties toward the lowest class index
    labels = np.argmax(logits, axis=1).astype(np.int64)
    labels[labeled_mask] = truth[labeled_mask]
    return PseudoLabelState(labels, labeled_mask.copy())


def update_pseudo_labels(
    table: Table, split: SplitSpec, encoder: Encoder1Hot, params: ModelParams
) -> PseudoLabelState:
    """Current-model class guesses; labeled rows keep their true label."""
    train_idx = split.train_idx
    x = encoder.encode(table.values[train_idx], dtype=np.float32)
    h, _ = forward_encoder(x, params)
    logits, _ = forward_head(h, params.theta_c, "class_head")
    state = _pseudo_from_logits(
        logits, table.labels[train_idx], _labeled_mask(split)
    )
    state.validate(table.schema.class_count)
    return state


def pseudo_label_accuracy(state: PseudoLabelState, truth: np.ndarray) -> float:
    """Agreement with the hidden truth, over pseudo-labeled rows only."""
    pseudo = ~state.is_ground_truth
    if not pseudo.any():
        raise ValueError("no pseudo-labeled rows to score")
    return float(np.mean(state.labels[pseudo] == truth[pseudo]))


def _run_head_epochs(
    params: ModelParams,
    h_lab: np.ndarray,
    y_lab: np.ndarray,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    adam: AdamState,
) -> None:
    """Train the classification head on fixed encoder outputs."""
    n = h_lab.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start : start + batch_size]
            out, hcache = forward_head(h_lab[rows], params.theta_c, "class_head")
            _, d_out = cross_entropy(out, y_lab[rows])
            _, head_grads = backward_encoder_head(
                params, params.theta_c, [], h_lab[rows], hcache, out, d_out,
                freeze_encoder=True,
            )
            optimizer_step(params.theta_c, head_grads, adam)


def pretrain(
    table: Table,
    split: SplitSpec,
    cfg: TrainConfig,
    profile: Optional[ImportanceProfile] = None,
    view_log: Optional[list] = None,
) -> tuple[ModelParams, list[float]]:
    """Contrastive pretraining; returns the model and per-epoch mean loss.

    `view_log`, when given, collects (epoch, batch_rows, raw_views) tuples
    for every batch; intended for equivalence checks, not production runs.
    """
    if cfg.method == "no_pretrain":
        raise ValueError("the no_pretrain arm has no pretraining stage")
    if cfg.subset_mode != "uniform" and profile is None:
        raise ValueError("correlated subset modes need an importance profile")
    if table.labels is None:
        raise ValueError("pretraining needs a labeled table")

    encoder = fit_encoder(table, split)
    train_idx = split.train_idx
    pool_raw = table.values[train_idx]
    truth = table.labels[train_idx]
    labeled_mask = _labeled_mask(split)
    n_train = train_idx.shape[0]
    class_count = table.schema.class_count

    rngs = rng_streams(cfg.seed)
    spec = model_spec(cfg, encoder.width, class_count)
    params = init_model(spec, rngs["init"])
    adam_contrastive = AdamState.for_params(
        params.theta_e + params.theta_p, lr=cfg.learning_rate
    )
    # the head sees few rows and few epochs per refresh, so it gets its own lr
    adam_head = AdamState.for_params(params.theta_c, lr=cfg.head_learning_rate)

    plan = CorruptionPlan(cfg.p, subset_mode=cfg.subset_mode, value_mode=cfg.value_mode)
    pm = profile.matrix if profile is not None else None
    x_anchor = encoder.encode(pool_raw, dtype=np.float32)
    y_lab = truth[labeled_mask]
    needs_classes = cfg.value_mode == "class_conditioned"
    refreshes = cfg.method in ("class_conditioned", "oracle")
    static_ctx = None
    if not needs_classes:
        static_ctx = CorruptionContext(pool_raw, profile_matrix=pm)

    def refresh_head() -> None:
        if cfg.reinit_head_at_refresh:
            fresh = init_model(spec, rngs["head"])
            for dst, src in zip(params.theta_c, fresh.theta_c):
                dst[...] = src
            adam_head.m = [np.zeros_like(q) for q in params.theta_c]
            adam_head.v = [np.zeros_like(q) for q in params.theta_c]
            adam_head.t = 0
        h_lab, _ = forward_encoder(x_anchor[labeled_mask], params)
        _run_head_epochs(
            params, h_lab, y_lab, cfg.head_refresh_epochs, cfg.batch_size,
            rngs["head"], adam_head,
        )

    if cfg.warm_start_head and refreshes:
        refresh_head()

    loss_curve: list[float] = []
    for epoch in range(cfg.pretrain_epochs):
        if needs_classes:
            if cfg.method == "oracle" or cfg.force_truth_pseudo_labels:
                epoch_classes = truth
            else:
                h_all, _ = forward_encoder(x_anchor, params)
                logits, _ = forward_head(h_all, params.theta_c, "class_head")
                epoch_classes = _pseudo_from_logits(logits, truth, labeled_mask).labels
            ctx = CorruptionContext(pool_raw, epoch_classes, class_count, pm)
        else:
            epoch_classes = None
            ctx = static_ctx

        order = rngs["corrupt"].permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            anchor_classes = epoch_classes[rows] if needs_classes else None
            raw_views, _ = corrupt_batch(
                pool_raw[rows], plan, ctx, rngs["corrupt"], anchor_classes
            )
            if view_log is not None:
                view_log.append((epoch, rows.copy(), raw_views.copy()))
            x_views = encoder.encode(raw_views, dtype=np.float32)
            stacked = np.concatenate([x_anchor[rows], x_views], axis=0)
            h, enc_cache = forward_encoder(stacked, params)
            z, proj_cache = forward_head(h, params.theta_p, "pretrain_head")
            loss, d_z = ntxent_loss(z, cfg.tau)
            if not np.isfinite(loss):
                raise DivergenceError(
                    epoch + 1, f"contrastive loss diverged at epoch {epoch + 1}"
                )
            enc_grads, proj_grads = backward_encoder_head(
                params, params.theta_p, enc_cache, h, proj_cache, z,
                d_z.astype(np.float32),
            )
            optimizer_step(
                params.theta_e + params.theta_p, enc_grads + proj_grads,
                adam_contrastive,
            )
            epoch_loss += loss * rows.shape[0]
        loss_curve.append(epoch_loss / n_train)

        if refreshes and (epoch + 1) % cfg.pseudo_update_interval == 0:
            refresh_head()

    return params, loss_curve


def finetune(
    table: Table, split: SplitSpec, params: ModelParams, cfg: TrainConfig
) -> FinetuneResult:
    """Train the classification head with the encoder frozen; score the test split.

    theta_e is never touched (no gradient is even computed for it) and the
    projection head plays no part.  AUROC uses softmax probabilities; when
    the test split holds a single class it is reported as nan.
    """
    if table.labels is None:
        raise ValueError("fine-tuning needs a labeled table")
    encoder = fit_encoder(table, split)
    rng = rng_streams(cfg.seed)["finetune"]
    x_lab = encoder.encode(table.values[split.labeled_idx], dtype=np.float32)
    y_lab = table.labels[split.labeled_idx]
    h_lab, _ = forward_encoder(x_lab, params)
    adam = AdamState.for_params(params.theta_c, lr=cfg.head_learning_rate)
    _run_head_epochs(
        params, h_lab, y_lab, cfg.finetune_epochs, cfg.batch_size, rng, adam
    )

    x_test = encoder.encode(table.values[split.test_idx], dtype=np.float32)
    h_test, _ = forward_encoder(x_test, params)
    logits, _ = forward_head(h_test, params.theta_c, "class_head")
    y_test = table.labels[split.test_idx]
    predicted = np.argmax(logits, axis=1)
    acc = accuracy_metric(predicted, y_test)
    try:
        auc = auroc_metric(softmax(logits.astype(np.float64)), y_test)
    except MetricError:
        auc = float("nan")
    return FinetuneResult(acc, auc)


def run_single(
    table: Table,
    split: SplitSpec,
    cfg: TrainConfig,
    dataset_id: str = "",
    profile: Optional[ImportanceProfile] = None,
    manifest_hash: str = "",
) -> RunRecord:
    """One (dataset, method, seed) run: pretrain if applicable, then fine-tune."""
    if cfg.method == "no_pretrain":
        encoder = fit_encoder(table, split)
        spec = model_spec(cfg, encoder.width, table.schema.class_count)
        params = init_model(spec, rng_streams(cfg.seed)["init"])
        curve: tuple[float, ...] = ()
    else:
        params, curve_list = pretrain(table, split, cfg, profile)
        curve = tuple(curve_list)
    result = finetune(table, split, params, cfg)
    return RunRecord(
        dataset=dataset_id,
        method=cfg.method,
        subset_mode=cfg.subset_mode,
        seed=cfg.seed,
        accuracy=result.accuracy,
        auroc=result.auroc,
        loss_curve=curve,
        manifest_hash=manifest_hash,
    )
