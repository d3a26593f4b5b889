"""Dataset manifest: class vocabulary, splits, and record references."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .container import FrameFeatureSequence, read_feature_file


@dataclass
class RecordRef:
    """Pointer to one record: container file (relative to the manifest) + index."""

    file: str
    index: int


@dataclass
class DatasetManifest:
    classes: list[str]
    dim: int
    splits: dict[str, list[RecordRef]]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")
        if any(not c for c in self.classes):
            raise ValueError("class names must be nonempty")

    def to_json(self) -> dict:
        return {
            "classes": self.classes,
            "dim": self.dim,
            "splits": {
                name: [{"file": r.file, "index": r.index} for r in refs]
                for name, refs in self.splits.items()
            },
            "provenance": self.provenance,
        }


def save_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return DatasetManifest(
        classes=list(raw["classes"]),
        dim=int(raw["dim"]),
        splits={
            name: [RecordRef(entry["file"], int(entry["index"])) for entry in refs]
            for name, refs in raw["splits"].items()
        },
        provenance=dict(raw.get("provenance", {})),
    )


def load_split(manifest: DatasetManifest, base_dir, split: str) -> list[FrameFeatureSequence]:
    """Resolve a split's record references, validating shape and labels."""
    if split not in manifest.splits:
        raise KeyError(f"manifest has no split {split!r}; available: {sorted(manifest.splits)}")
    base = Path(base_dir)
    cache: dict[str, list[FrameFeatureSequence]] = {}
    records = []
    for ref in manifest.splits[split]:
        if ref.file not in cache:
            cache[ref.file] = read_feature_file(base / ref.file)
        recs = cache[ref.file]
        if not 0 <= ref.index < len(recs):
            raise ValueError(
                f"record reference {ref.file}#{ref.index} out of range "
                f"({len(recs)} records in file)"
            )
        rec = recs[ref.index]
        if rec.dim != manifest.dim:
            raise ValueError(
                f"record {rec.video_id!r} in {ref.file} has dim {rec.dim}, "
                f"manifest declares {manifest.dim}"
            )
        if rec.label_index >= len(manifest.classes):
            raise ValueError(
                f"record {rec.video_id!r} has label_index {rec.label_index}, "
                f"manifest has only {len(manifest.classes)} classes"
            )
        records.append(rec)
    return records
