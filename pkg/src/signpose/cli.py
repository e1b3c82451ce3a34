"""Command-line front door: synth, ingest, downsample, train, eval, ablate, stats.

Every subcommand is reproducible via --seed; SIGNPOSE_THREADS caps BLAS
worker parallelism. A config file of ``key = value`` lines can supply any
train/ablate option (augment knobs use their dotted names, e.g.
``augment.jitter_sigma``); explicit flags always win.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .augment import AugmentConfig
from .dataset import (
    Manifest,
    ManifestEntry,
    downsample,
    gloss_stats,
    load_manifest,
    save_manifest,
    synth_manifest,
    top_k_glosses,
)
from .keypoints import SynthSpec, parse_keypoint_file, validate_sequence
from .models import PoseLSTMConfig, PoseTransformerConfig, load_checkpoint
from .normalize import NormalizationStrategy
from .train import TrainConfig, evaluate, run_ablation, train

NORM_CHOICES = [s.value for s in NormalizationStrategy]

# Resolution order for train/ablate options: flag > config file > default.
TRAIN_DEFAULTS = {
    "model": "lstm",
    "norm": "com",
    "epochs": 60,
    "batch_size": 32,
    "lr": 1e-3,
    "seq_len": 64,
    "seed": 0,
    "embed_dim": 128,
    "hidden_dim": 256,
    "bidirectional": True,
    "dropout": None,  # 0.2 for lstm, 0.1 for transformer
    "d_model": 256,
    "heads": 4,
    "layers": 3,
    "augment": False,
    "augment.jitter_sigma": 0.01,
    "augment.scale_lo": 0.8,
    "augment.scale_hi": 1.2,
    "augment.temporal_dropout_rate": 0.05,
    "augment.seed": 0,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signpose",
        description="Pose-keypoint isolated sign language recognition toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic keypoint dataset")
    p.add_argument("--classes", type=int, required=True, help="number of gloss classes")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--train-per-class", type=int, default=30)
    p.add_argument("--val-per-class", type=int, default=10)
    p.add_argument("--test-per-class", type=int, default=0)
    p.add_argument("--frames", type=int, default=40, help="frames per sequence")
    p.add_argument("--translation", type=float, default=0.0,
                   help="max magnitude of the per-instance global translation")
    p.add_argument("--scale-lo", type=float, default=1.0)
    p.add_argument("--scale-hi", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="index extractor keypoint files into a manifest")
    p.add_argument("--keypoints", required=True, help="directory of .pose.json files")
    p.add_argument("--out", required=True, help="manifest CSV to write")
    p.add_argument("--split", choices=["train", "val", "test"], default="train")

    p = sub.add_parser("downsample", help="restrict a manifest to the top-k glosses")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=100, help="number of glosses to keep")
    p.add_argument("--out", required=True)

    def add_train_options(p, with_out=True):
        if with_out:
            p.add_argument("--out", required=True, help="checkpoint/metrics directory")
        p.add_argument("--config", help="key = value option file; flags win")
        p.add_argument("--model", choices=["lstm", "transformer"], default=None)
        p.add_argument("--norm", choices=NORM_CHOICES, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--seq-len", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--embed-dim", type=int, default=None)
        p.add_argument("--hidden-dim", type=int, default=None)
        p.add_argument("--unidirectional", action="store_true", default=None,
                       help="use a single-direction LSTM")
        p.add_argument("--dropout", type=float, default=None)
        p.add_argument("--d-model", type=int, default=None)
        p.add_argument("--heads", type=int, default=None)
        p.add_argument("--layers", type=int, default=None)
        p.add_argument("--augment", action="store_true", default=None,
                       help="enable the stochastic augmentation pipeline")
        p.add_argument("--jitter-sigma", type=float, default=None)
        p.add_argument("--scale-aug-lo", type=float, default=None)
        p.add_argument("--scale-aug-hi", type=float, default=None)
        p.add_argument("--temporal-dropout", type=float, default=None)
        p.add_argument("--augment-seed", type=int, default=None)

    p = sub.add_parser("train", help="train a classifier from a manifest")
    p.add_argument("--manifest", required=True)
    add_train_options(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="val")
    p.add_argument("--json", help="also write the metrics as JSON here")

    p = sub.add_parser("ablate", help="train one model per value of one axis")
    p.add_argument("--manifest", required=True)
    p.add_argument("--axis", choices=["norm", "temporal", "dropout"], required=True)
    p.add_argument("--values", help="comma-separated axis values (defaults per axis)")
    add_train_options(p)

    p = sub.add_parser("stats", help="per-gloss statistics for one split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="train")
    p.add_argument("--json", help="write the stats as JSON here")
    p.add_argument("--histogram", help="write count,glosses histogram CSV here")

    return parser


def parse_args(argv) -> argparse.Namespace:
    """Parse argv into a validated command; exits with code 2 on usage errors."""
    return build_parser().parse_args(argv)


def _load_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in TRAIN_DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value, like):
    if not isinstance(value, str):
        return value
    if isinstance(like, bool):
        lowered = value.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"option {key!r}: expected a boolean, got {value!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(value)
    if isinstance(like, float) or like is None:
        return float(value)
    return value


def _resolve_train_options(args) -> dict:
    """Merge flags over config-file values over defaults."""
    config = _load_config_file(args.config) if args.config else {}
    flag_names = {
        "model": args.model,
        "norm": args.norm,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "seq_len": args.seq_len,
        "seed": args.seed,
        "embed_dim": args.embed_dim,
        "hidden_dim": args.hidden_dim,
        "bidirectional": None if args.unidirectional is None else not args.unidirectional,
        "dropout": args.dropout,
        "d_model": args.d_model,
        "heads": args.heads,
        "layers": args.layers,
        "augment": args.augment,
        "augment.jitter_sigma": args.jitter_sigma,
        "augment.scale_lo": args.scale_aug_lo,
        "augment.scale_hi": args.scale_aug_hi,
        "augment.temporal_dropout_rate": args.temporal_dropout,
        "augment.seed": args.augment_seed,
    }
    out = {}
    for key, default in TRAIN_DEFAULTS.items():
        if flag_names.get(key) is not None:
            out[key] = flag_names[key]
        elif key in config:
            out[key] = _coerce(key, config[key], default if default is not None else 0.0)
        else:
            out[key] = default
    return out


def _train_config(opts: dict, n_classes: int, checkpoint_dir=None) -> TrainConfig:
    if opts["model"] == "lstm":
        model = PoseLSTMConfig(
            n_classes=n_classes,
            embed_dim=opts["embed_dim"],
            hidden_dim=opts["hidden_dim"],
            bidirectional=opts["bidirectional"],
            dropout_rate=0.2 if opts["dropout"] is None else opts["dropout"],
        )
    else:
        model = PoseTransformerConfig(
            n_classes=n_classes,
            d_model=opts["d_model"],
            n_heads=opts["heads"],
            n_layers=opts["layers"],
            dropout_rate=0.1 if opts["dropout"] is None else opts["dropout"],
        )
    augment = None
    if opts["augment"]:
        augment = AugmentConfig(
            jitter_sigma=opts["augment.jitter_sigma"],
            scale_lo=opts["augment.scale_lo"],
            scale_hi=opts["augment.scale_hi"],
            temporal_dropout_rate=opts["augment.temporal_dropout_rate"],
            seed=opts["augment.seed"],
        )
    return TrainConfig(
        model=model,
        normalization=NormalizationStrategy(opts["norm"]),
        augment=augment,
        epochs=opts["epochs"],
        batch_size=opts["batch_size"],
        lr=opts["lr"],
        seq_len=opts["seq_len"],
        seed=opts["seed"],
        checkpoint_dir=str(checkpoint_dir) if checkpoint_dir else None,
    )


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        n_classes=args.classes,
        seqs_per_class=args.train_per_class + args.val_per_class + args.test_per_class,
        frames=args.frames,
        nuisance_translation=args.translation,
        nuisance_scale_range=(args.scale_lo, args.scale_hi),
        seed=args.seed,
    )
    manifest = synth_manifest(
        spec, args.out,
        train_per_class=args.train_per_class,
        val_per_class=args.val_per_class,
        test_per_class=args.test_per_class,
    )
    print(f"wrote {len(manifest)} sequences and manifest.csv under {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    root = Path(args.keypoints)
    files = sorted(root.glob("*.pose.json"))
    if not files:
        raise FileNotFoundError(f"no .pose.json files under {root}")
    entries = []
    seen = set()
    for path in files:
        seq = parse_keypoint_file(path.read_bytes())
        violations = validate_sequence(seq)
        if violations:
            raise ValueError(f"{path}: {violations[0]}")
        if seq.video_id in seen:
            raise ValueError(f"{path}: duplicate video_id {seq.video_id!r}")
        seen.add(seq.video_id)
        entries.append(
            ManifestEntry(seq.video_id, seq.gloss, seq.signer_id, args.split, str(path))
        )
    save_manifest(Manifest(tuple(entries)), args.out)
    print(f"ingested {len(entries)} keypoint files into {args.out}")
    return 0


def _cmd_downsample(args) -> int:
    manifest = load_manifest(args.manifest)
    selected = top_k_glosses(manifest, args.k)
    reduced = downsample(manifest, selected)
    save_manifest(reduced, args.out)
    counts = {s: len(reduced.split(s)) for s in ("train", "val", "test")}
    print(f"kept {args.k} glosses: train={counts['train']} val={counts['val']} test={counts['test']}")
    return 0


def _cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    opts = _resolve_train_options(args)
    n_classes = len({e.gloss for e in manifest.split("train")})
    cfg = _train_config(opts, n_classes, checkpoint_dir=args.out)
    ckpt, history = train(manifest, cfg)
    best = max((m for m in history if m.split == "val"), key=lambda m: m.top1, default=None)
    if best is not None:
        print(f"best val: epoch={best.epoch} top1={best.top1:.4f} top5={best.top5:.4f}")
    print(f"checkpoint and metrics written under {args.out}")
    return 0


def _cmd_eval(args) -> int:
    if not Path(args.checkpoint).exists():
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    ckpt = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    metrics = evaluate(ckpt, manifest, args.split)
    print(f"{args.split}: loss={metrics.loss:.4f} top1={metrics.top1:.4f} top5={metrics.top5:.4f}")
    if args.json:
        Path(args.json).write_text(metrics.to_json() + "\n")
    return 0


AXIS_NAMES = {"norm": "normalization", "temporal": "temporal-model", "dropout": "dropout"}
AXIS_DEFAULTS = {
    "norm": ["raw", "nose", "face", "com"],
    "temporal": ["lstm", "bilstm", "transformer"],
    "dropout": ["0", "0.1", "0.2", "0.3"],
}


def _cmd_ablate(args) -> int:
    manifest = load_manifest(args.manifest)
    opts = _resolve_train_options(args)
    values = args.values.split(",") if args.values else AXIS_DEFAULTS[args.axis]
    axis = AXIS_NAMES[args.axis]
    n_classes = len({e.gloss for e in manifest.split("train")})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _train_config(opts, n_classes, checkpoint_dir=out_dir / "runs")
    if axis == "dropout":
        values = [float(v) for v in values]
    report = run_ablation(manifest, base, axis, values)
    (out_dir / "report.csv").write_text(report.to_csv())
    (out_dir / "report.txt").write_text(report.to_text() + "\n")
    print(report.to_text())
    return 0


def _cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    stats = gloss_stats(manifest, args.split)
    print(stats.to_text())
    if args.json:
        Path(args.json).write_text(stats.to_json() + "\n")
    if args.histogram:
        rows = ["count,glosses"] + [f"{c},{n}" for c, n in stats.histogram().items()]
        Path(args.histogram).write_text("\n".join(rows) + "\n")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "downsample": _cmd_downsample,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "stats": _cmd_stats,
}


def run(args) -> int:
    """Execute a parsed command; returns 0 on success, 1 on runtime failure."""
    threads = os.environ.get("SIGNPOSE_THREADS")
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(threads)):
                return _COMMANDS[args.command](args)
        return _COMMANDS[args.command](args)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"signpose {args.command}: error: {e}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
