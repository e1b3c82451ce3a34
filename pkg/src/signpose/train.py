"""Training loop, top-1/top-5 evaluation, and ablation runners.

Everything is deterministic given the config seed: shuffling, dropout and
augmentation draw from generators keyed on (seed, stream, epoch/index), so
two runs with the same seed produce bit-identical metrics histories.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, augment_sequence
from .dataset import Manifest, ManifestEntry
from .keypoints import PoseSequence, parse_keypoint_file, resample_temporal
from .models import (
    Checkpoint,
    ModelConfig,
    PoseLSTMConfig,
    PoseTransformerConfig,
    forward,
    init_params,
    save_checkpoint,
)
from .ndcore import AdamState, Parameter, adam_step, softmax_cross_entropy, zero_grads
from .normalize import NormalizationStrategy, normalize_sequence
from .rng import DROPOUT, SHUFFLE, derive_rng

CHECKPOINT_NAME = "best.ckpt.json"
METRICS_NAME = "metrics.jsonl"


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; carries the last good checkpoint and history."""

    def __init__(self, message, checkpoint=None, history=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.history = history or []


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    normalization: NormalizationStrategy = NormalizationStrategy.PER_FRAME_COM
    augment: AugmentConfig | None = None
    epochs: int = 60
    batch_size: int = 32
    lr: float = 1e-3
    seq_len: int = 64
    seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1 or self.seq_len < 1 or not self.lr > 0:
            raise ValueError("batch_size, seq_len and lr must be positive")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    split: str
    loss: float
    top1: float
    top5: float

    def __post_init__(self):
        if not (0.0 <= self.top1 <= 1.0 and 0.0 <= self.top5 <= 1.0):
            raise ValueError("accuracies must lie in [0, 1]")
        if self.top5 < self.top1:
            raise ValueError(f"top5 ({self.top5}) < top1 ({self.top1})")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))


def metrics_to_jsonl(history) -> str:
    return "".join(m.to_json() + "\n" for m in history)


def top_k_accuracy(logits, labels, k: int) -> float:
    """Fraction of rows whose label ranks within the top k logits.

    Ties rank the lower class index first, so the result is deterministic.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError(f"logits must be (N, C), got {logits.shape}")
    n, c = logits.shape
    if not 1 <= k <= c:
        raise ValueError(f"k must be in [1, {c}], got {k}")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError("labels must have one entry per logits row")
    if n == 0:
        raise ValueError("cannot score an empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"label out of range [0, {c})")
    own = logits[np.arange(n), labels][:, None]
    better = (logits > own).sum(axis=1)
    tied_lower = ((logits == own) & (np.arange(c)[None, :] < labels[:, None])).sum(axis=1)
    return float(((better + tied_lower) < k).mean())


# -- data preparation ---------------------------------------------------------

def load_sequence(entry: ManifestEntry) -> PoseSequence:
    try:
        raw = Path(entry.keypoint_path).read_bytes()
    except OSError as e:
        raise ValueError(f"cannot read keypoint file {entry.keypoint_path!r}: {e}") from e
    return parse_keypoint_file(raw)


def prepare_sequence(seq: PoseSequence, strategy: NormalizationStrategy, seq_len: int):
    """normalize -> resample; returns the fixed-length sequence."""
    return resample_temporal(normalize_sequence(seq, strategy), seq_len)


def sequence_to_row(seq: PoseSequence):
    """(T, 237) coordinates plus the (T,) validity mask (any group present)."""
    coords = seq.coords_array().reshape(len(seq), -1)
    mask = seq.presence_array().any(axis=1)
    return coords, mask


def batch_rows(seqs):
    """Stack per-sequence rows into (N, T, 237) and (N, T) arrays."""
    xs, ms = zip(*(sequence_to_row(s) for s in seqs))
    return np.stack(xs), np.stack(ms)


def _prepare_split(entries, strategy, seq_len, classes=None):
    seqs, labels = [], []
    for e in entries:
        seq = prepare_sequence(load_sequence(e), strategy, seq_len)
        if not seq.presence_array().any():
            raise ValueError(f"sample {e.video_id!r} has no visible frames after resampling")
        seqs.append(seq)
        labels.append(e.gloss)
    if classes is None:
        classes = sorted(set(labels))
    index = {g: i for i, g in enumerate(classes)}
    unknown = [g for g in labels if g not in index]
    if unknown:
        raise ValueError(f"gloss {unknown[0]!r} not among the trained classes")
    y = np.array([index[g] for g in labels], dtype=np.int64)
    return seqs, y, list(classes)


def _eval_arrays(model_cfg, params, x, mask, y, batch_size=128):
    losses, top1_hits, top5_hits = [], 0.0, 0.0
    n = len(x)
    k5 = min(5, model_cfg.n_classes)
    for lo in range(0, n, batch_size):
        sl = slice(lo, min(lo + batch_size, n))
        out = forward(x[sl], mask[sl], model_cfg, params, training=False)
        loss, _ = softmax_cross_entropy(out.logits, y[sl])
        b = sl.stop - sl.start
        losses.append(loss.item() * b)
        top1_hits += top_k_accuracy(out.logits.data, y[sl], 1) * b
        top5_hits += top_k_accuracy(out.logits.data, y[sl], k5) * b
    return sum(losses) / n, top1_hits / n, top5_hits / n


@dataclass
class FitResult:
    params: dict
    optimizer: AdamState
    history: list[EpochMetrics]
    best_params: dict
    best_epoch: int
    best_val_top1: float
    classes: list[str]


def fit_model(
    model_cfg: ModelConfig,
    train_seqs,
    y_train,
    classes,
    *,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
    augment_cfg: AugmentConfig | None = None,
    val_data=None,
    on_epoch=None,
) -> FitResult:
    """Inner training engine over prepared fixed-length sequences.

    ``val_data`` is an optional (x, mask, y) triple; when present the best
    validation-top-1 parameters are snapshotted. Raises
    TrainingDivergedError on a non-finite loss.
    """
    params = init_params(model_cfg, seed)
    opt = AdamState.for_params(params, lr=lr)
    n = len(train_seqs)
    history: list[EpochMetrics] = []
    best_params = _clone(params)
    best_epoch, best_top1 = -1, -1.0
    k5 = min(5, model_cfg.n_classes)

    static_rows = None
    if augment_cfg is None:
        static_rows = batch_rows(train_seqs)

    for epoch in range(epochs):
        order = derive_rng(seed, SHUFFLE, epoch).permutation(n)
        epoch_loss, top1_sum, top5_sum = 0.0, 0.0, 0.0
        for b, lo in enumerate(range(0, n, batch_size)):
            idx = order[lo : lo + batch_size]
            if static_rows is not None:
                bx, bm = static_rows[0][idx], static_rows[1][idx]
            else:
                rows = [
                    sequence_to_row(
                        augment_sequence(train_seqs[i], augment_cfg, epoch * n + int(i))
                    )
                    for i in idx
                ]
                bx = np.stack([r[0] for r in rows])
                bm = np.stack([r[1] for r in rows])
            by = y_train[idx]
            rng = derive_rng(seed, DROPOUT, epoch, b)
            out = forward(bx, bm, model_cfg, params, training=True, rng=rng)
            loss, _ = softmax_cross_entropy(out.logits, by)
            if not np.isfinite(loss.item()):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b}",
                    checkpoint=(best_params if best_epoch >= 0 else _clone(params)),
                    history=history,
                )
            zero_grads(params)
            loss.backward()
            adam_step(params, opt)
            bsz = len(idx)
            epoch_loss += loss.item() * bsz
            top1_sum += top_k_accuracy(out.logits.data, by, 1) * bsz
            top5_sum += top_k_accuracy(out.logits.data, by, k5) * bsz

        train_metrics = EpochMetrics(
            epoch, "train", epoch_loss / n, top1_sum / n, top5_sum / n
        )
        history.append(train_metrics)
        if val_data is not None:
            vx, vm, vy = val_data
            vloss, vtop1, vtop5 = _eval_arrays(model_cfg, params, vx, vm, vy)
            history.append(EpochMetrics(epoch, "val", vloss, vtop1, vtop5))
            if vtop1 > best_top1:
                best_top1, best_epoch = vtop1, epoch
                best_params = _clone(params)
        if on_epoch is not None:
            on_epoch(epoch, history)

    if val_data is None or best_epoch < 0:
        best_params, best_epoch, best_top1 = _clone(params), epochs - 1, -1.0
    return FitResult(params, opt, history, best_params, best_epoch, best_top1, list(classes))


def _clone(params):
    return {k: Parameter(p.data.copy(), k) for k, p in params.items()}


def train(manifest: Manifest, cfg: TrainConfig):
    """Full harness: load, normalize, resample, augment, fit, checkpoint.

    Returns (best checkpoint, metrics history). The best checkpoint (by
    validation top-1) and the history are also written to
    cfg.checkpoint_dir when it is set.
    """
    train_entries = manifest.split("train")
    val_entries = manifest.split("val")
    if not train_entries or not val_entries:
        raise ValueError("manifest needs non-empty train and val splits")

    train_seqs, y_train, classes = _prepare_split(train_entries, cfg.normalization, cfg.seq_len)
    val_seqs, y_val, _ = _prepare_split(val_entries, cfg.normalization, cfg.seq_len, classes)
    vx, vm = batch_rows(val_seqs)

    out_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def make_checkpoint(params, opt, epoch, history):
        return Checkpoint(
            config=cfg.model,
            params=params,
            classes=classes,
            epoch=epoch + 1,
            seed=cfg.seed,
            normalization=cfg.normalization.value,
            seq_len=cfg.seq_len,
            optimizer=opt,
            history=[dataclasses.asdict(m) for m in history],
        )

    try:
        result = fit_model(
            cfg.model,
            train_seqs,
            y_train,
            classes,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            seed=cfg.seed,
            augment_cfg=cfg.augment,
            val_data=(vx, vm, y_val),
        )
    except TrainingDivergedError as e:
        if out_dir and e.checkpoint is not None:
            ckpt = make_checkpoint(e.checkpoint, None, -1, e.history)
            save_checkpoint(ckpt, out_dir / CHECKPOINT_NAME)
            (out_dir / METRICS_NAME).write_text(metrics_to_jsonl(e.history))
        raise

    ckpt = make_checkpoint(result.best_params, result.optimizer, result.best_epoch, result.history)
    if out_dir:
        save_checkpoint(ckpt, out_dir / CHECKPOINT_NAME)
        (out_dir / METRICS_NAME).write_text(metrics_to_jsonl(result.history))
    return ckpt, result.history


def evaluate(ckpt: Checkpoint, manifest: Manifest, split: str) -> EpochMetrics:
    """Loss/top-1/top-5 on one split, with the checkpoint's preprocessing
    and no augmentation."""
    entries = manifest.split(split)
    if not entries:
        raise ValueError(f"split {split!r} is empty")
    strategy = NormalizationStrategy(ckpt.normalization)
    seqs, y, _ = _prepare_split(entries, strategy, ckpt.seq_len, ckpt.classes)
    x, mask = batch_rows(seqs)
    loss, top1, top5 = _eval_arrays(ckpt.config, ckpt.params, x, mask, y)
    return EpochMetrics(ckpt.epoch, split, loss, top1, top5)


# -- ablations -----------------------------------------------------------------

ABLATION_AXES = ("normalization", "temporal-model", "dropout")


@dataclass(frozen=True)
class AblationRow:
    value: str
    top1: float
    top5: float


@dataclass(frozen=True)
class AblationReport:
    axis: str
    rows: tuple[AblationRow, ...]

    def to_csv(self) -> str:
        lines = [f"{self.axis},top1,top5"]
        lines += [f"{r.value},{r.top1},{r.top5}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(self.axis), *(len(r.value) for r in self.rows))
        head = f"{self.axis:<{width}}  top1    top5"
        sep = "-" * len(head)
        body = [f"{r.value:<{width}}  {r.top1:<6.4f}  {r.top5:.4f}" for r in self.rows]
        return "\n".join([head, sep, *body])


def _cfg_for_axis_value(base: TrainConfig, axis: str, value) -> TrainConfig:
    if axis == "normalization":
        return replace(base, normalization=NormalizationStrategy(str(value)))
    if axis == "dropout":
        return replace(base, model=replace(base.model, dropout_rate=float(value)))
    if axis == "temporal-model":
        m = base.model
        n_classes = m.n_classes
        input_dim = m.input_dim
        if value in ("lstm", "bilstm"):
            if isinstance(m, PoseLSTMConfig):
                model = replace(m, bidirectional=(value == "bilstm"))
            else:
                model = PoseLSTMConfig(
                    n_classes=n_classes, input_dim=input_dim,
                    bidirectional=(value == "bilstm"),
                )
        elif value == "transformer":
            if isinstance(m, PoseTransformerConfig):
                model = m
            else:
                model = PoseTransformerConfig(n_classes=n_classes, input_dim=input_dim)
        else:
            raise ValueError(f"unknown temporal-model value {value!r}")
        return replace(base, model=model)
    raise ValueError(f"unknown ablation axis {axis!r}; expected one of {ABLATION_AXES}")


def run_ablation(manifest: Manifest, base_cfg: TrainConfig, axis: str, values) -> AblationReport:
    """Train one model per axis value with a shared seed; tabulate best-val
    top-1/top-5 per value, mirroring the ablation-table layout."""
    values = list(values)
    if not values:
        raise ValueError("values must be non-empty")
    rows = []
    for value in values:
        cfg = _cfg_for_axis_value(base_cfg, axis, value)
        if cfg.checkpoint_dir:
            cfg = replace(cfg, checkpoint_dir=str(Path(cfg.checkpoint_dir) / str(value)))
        ckpt, history = train(manifest, cfg)
        val_best = max(
            (m for m in history if m.split == "val"),
            key=lambda m: m.top1,
            default=None,
        )
        if val_best is None:
            raise ValueError("ablation training produced no validation metrics")
        rows.append(AblationRow(str(value), val_best.top1, val_best.top5))
    return AblationReport(axis, tuple(rows))
