"""Dataset manifests, gloss-frequency downsampling, and gloss statistics."""

from __future__ import annotations

import csv
import io
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .keypoints import SynthSpec, synth_gloss_sequence, write_keypoint_file

SPLITS = ("train", "val", "test")
MANIFEST_COLUMNS = ("video_id", "gloss", "signer_id", "split", "keypoint_path")


class ManifestError(ValueError):
    """Malformed or inconsistent manifest data."""


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    gloss: str
    signer_id: str
    split: str
    keypoint_path: str


@dataclass(frozen=True)
class Manifest:
    """Index of videos: id, gloss, signer, split, and keypoint file path."""

    entries: tuple[ManifestEntry, ...]

    def __len__(self):
        return len(self.entries)

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def glosses(self, split: str | None = None) -> list[str]:
        rows = self.entries if split is None else self.split(split)
        return sorted({e.gloss for e in rows})


def load_manifest(source) -> Manifest:
    """Read a manifest CSV (bytes, text, or path) and validate it."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, (str, Path)) and "\n" not in str(source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(reader.fieldnames or ())
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise ManifestError(f"manifest is missing columns: {', '.join(missing)}")

    entries = []
    seen: set[str] = set()
    for i, row in enumerate(reader):
        vid = row["video_id"]
        if vid in seen:
            raise ManifestError(f"duplicate video_id {vid!r} (row {i + 2})")
        seen.add(vid)
        if row["split"] not in SPLITS:
            raise ManifestError(
                f"unknown split {row['split']!r} for video {vid!r}; expected one of {SPLITS}"
            )
        entries.append(
            ManifestEntry(vid, row["gloss"], row["signer_id"], row["split"], row["keypoint_path"])
        )
    return Manifest(tuple(entries))


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            writer.writerow([e.video_id, e.gloss, e.signer_id, e.split, e.keypoint_path])


_TRAILING_DIGITS = re.compile(r"^(.*?)(\d+)$")


def base_gloss(name: str) -> str:
    """Strip the maximal trailing digit run (the variant suffix).

    All-digit names are returned unchanged.
    """
    m = _TRAILING_DIGITS.match(name)
    if m and m.group(1):
        return m.group(1)
    return name


def top_k_glosses(manifest: Manifest, k: int) -> list[str]:
    """The k most common train-split glosses, most-common first.

    Ties break alphabetically; a gloss whose base name matches an
    already-selected gloss (a numbered variant of the same word) is skipped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(e.gloss for e in manifest.split("train"))
    ordered = sorted(counts, key=lambda g: (-counts[g], g))
    selected: list[str] = []
    bases: set[str] = set()
    for gloss in ordered:
        base = base_gloss(gloss)
        if base in bases:
            continue
        selected.append(gloss)
        bases.add(base)
        if len(selected) == k:
            return selected
    raise ManifestError(
        f"only {len(selected)} distinct gloss bases available in the train split, need {k}"
    )


def downsample(manifest: Manifest, glosses) -> Manifest:
    """Restrict all splits to the given glosses, preserving entry order."""
    glosses = list(glosses)
    if not glosses:
        raise ValueError("glosses must be non-empty")
    keep = set(glosses)
    return Manifest(tuple(e for e in manifest.entries if e.gloss in keep))


@dataclass(frozen=True)
class GlossStats:
    """Per-gloss instance counts within one split, plus summary statistics.

    ``median`` takes the lower-middle element for even-length count lists;
    ``std`` is the population standard deviation (``std_sample`` is the
    n-1 variant, reported for comparison).
    """

    split: str
    counts: dict[str, int]
    mean: float
    median: int
    std: float
    std_sample: float
    min_gloss: tuple[str, int]
    max_gloss: tuple[str, int]

    @property
    def n_glosses(self) -> int:
        return len(self.counts)

    @property
    def n_entries(self) -> int:
        return sum(self.counts.values())

    def histogram(self) -> dict[int, int]:
        """count-of-instances -> number of glosses with that count."""
        hist = Counter(self.counts.values())
        return dict(sorted(hist.items()))

    def to_json(self) -> str:
        doc = {
            "split": self.split,
            "n_glosses": self.n_glosses,
            "n_entries": self.n_entries,
            "mean": self.mean,
            "median": self.median,
            "std": self.std,
            "std_sample": self.std_sample,
            "min_gloss": list(self.min_gloss),
            "max_gloss": list(self.max_gloss),
            "counts": dict(sorted(self.counts.items())),
        }
        return json.dumps(doc, indent=2)

    def to_text(self) -> str:
        lines = [
            f"split:    {self.split}",
            f"glosses:  {self.n_glosses}",
            f"entries:  {self.n_entries}",
            f"mean:     {self.mean:.2f}",
            f"median:   {self.median}",
            f"std:      {self.std:.2f} (population; sample {self.std_sample:.2f})",
            f"min:      {self.min_gloss[0]} ({self.min_gloss[1]})",
            f"max:      {self.max_gloss[0]} ({self.max_gloss[1]})",
        ]
        return "\n".join(lines)


def gloss_stats(manifest: Manifest, split: str) -> GlossStats:
    """Instance-count statistics for one split; errors if the split is empty."""
    rows = manifest.split(split)
    if not rows:
        raise ManifestError(f"split {split!r} is empty")
    counts = Counter(e.gloss for e in rows)
    values = sorted(counts.values())
    n = len(values)
    mean = sum(values) / n
    median = values[(n - 1) // 2]
    var = sum((v - mean) ** 2 for v in values) / n
    var_sample = sum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
    # Alphabetical tie-break among glosses sharing the extreme count.
    min_name = min(counts, key=lambda g: (counts[g], g))
    max_name = min(counts, key=lambda g: (-counts[g], g))
    return GlossStats(
        split=split,
        counts=dict(counts),
        mean=mean,
        median=median,
        std=var**0.5,
        std_sample=var_sample**0.5,
        min_gloss=(min_name, counts[min_name]),
        max_gloss=(max_name, counts[max_name]),
    )


def synth_manifest(
    spec: SynthSpec,
    out_dir,
    train_per_class: int,
    val_per_class: int,
    test_per_class: int = 0,
) -> Manifest:
    """Write synthetic keypoint files plus a manifest under out_dir.

    Instances 0..train-1 go to train, the next val_per_class to val, the
    rest to test; spec.seqs_per_class must cover the total.
    """
    total = train_per_class + val_per_class + test_per_class
    if total > spec.seqs_per_class:
        raise ValueError(
            f"spec provides {spec.seqs_per_class} sequences per class, need {total}"
        )
    out_dir = Path(out_dir)
    kp_dir = out_dir / "keypoints"
    kp_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for class_id in range(spec.n_classes):
        for instance in range(total):
            if instance < train_per_class:
                split = "train"
            elif instance < train_per_class + val_per_class:
                split = "val"
            else:
                split = "test"
            seq = synth_gloss_sequence(spec, class_id, instance)
            path = kp_dir / f"{seq.video_id}.pose.json"
            path.write_bytes(write_keypoint_file(seq))
            entries.append(
                ManifestEntry(seq.video_id, seq.gloss, seq.signer_id, split, str(path))
            )
    manifest = Manifest(tuple(entries))
    save_manifest(manifest, out_dir / "manifest.csv")
    return manifest
