"""Converters from public annotation distributions into the native TSV schema.

Two source formats are supported:

* ``vg-sgg-h5`` — the widely mirrored Visual Genome scene-graph pack: an HDF5
  file (boxes_1024 as cx/cy/w/h in a 1024-max-side frame, 1-based label and
  predicate ids, per-image box/relation ranges, a train/test split array) plus
  its label-dictionary JSON and optionally an image-metadata JSON used to
  rescale boxes back to pixels.
* ``oi-vrd-csv`` — Open Images relationship annotation CSVs (one per split,
  normalized corner coordinates, MID object labels) plus an optional
  class-descriptions CSV mapping MIDs to display names.

Conversion is pure: re-running on the same inputs produces byte-identical
outputs, and every emitted record parses back through the native reader.
Records that cannot be represented (e.g. self-relations such as the Open
Images ``is`` attribute rows) are skipped and counted.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Mapping

from .core import BoundingBox, DetectedObject, RelationPrediction, SceneGraph, Vocabulary
from .errors import AdapterError, DuplicationError
from .ingest import DatasetSplit, file_checksum, write_scene_graphs, write_vocabulary

SOURCE_FORMATS = ("vg-sgg-h5", "oi-vrd-csv")

_OI_COLUMNS = ("ImageID", "LabelName1", "LabelName2", "XMin1", "XMax1", "YMin1", "YMax1",
               "XMin2", "XMax2", "YMin2", "YMax2", "RelationshipLabel")


@dataclass(frozen=True)
class AdapterManifest:
    """What to convert: source format, role-tagged input paths, output dir."""

    source_format: str
    inputs: tuple[tuple[str, str], ...]
    out_dir: str

    def __post_init__(self):
        if self.source_format not in SOURCE_FORMATS:
            raise AdapterError(f"unknown source format {self.source_format!r}")

    def path(self, role: str) -> str | None:
        for key, value in self.inputs:
            if key == role:
                return value
        return None

    def split_roles(self) -> list[tuple[str, str]]:
        return [(key.split(":", 1)[1], value) for key, value in self.inputs
                if key.startswith("split:")]


@dataclass(frozen=True)
class SplitCounts:
    name: str
    images: int
    objects: int
    relations: int
    skipped_relations: int


@dataclass(frozen=True)
class ConversionReport:
    source_format: str
    checksums: tuple[tuple[str, str], ...]
    vocabulary_path: str
    split_paths: tuple[tuple[str, str], ...]
    counts: tuple[SplitCounts, ...]

    def to_json(self) -> str:
        payload = {
            "source_format": self.source_format,
            "input_checksums": {path: digest for path, digest in self.checksums},
            "vocabulary": self.vocabulary_path,
            "splits": {name: path for name, path in self.split_paths},
            "counts": {
                c.name: {"images": c.images, "objects": c.objects,
                         "relations": c.relations, "skipped_relations": c.skipped_relations}
                for c in self.counts
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _count_split(split: DatasetSplit, skipped: int) -> SplitCounts:
    return SplitCounts(
        name=split.name,
        images=len(split),
        objects=sum(len(g.objects) for g in split),
        relations=sum(len(g.relations) for g in split),
        skipped_relations=skipped,
    )


def _emit(manifest: AdapterManifest, vocabulary: Vocabulary,
          splits: list[tuple[DatasetSplit, int]]) -> ConversionReport:
    os.makedirs(manifest.out_dir, exist_ok=True)
    vocab_path = os.path.join(manifest.out_dir, "vocabulary.txt")
    write_vocabulary(vocabulary, vocab_path)
    split_paths = []
    counts = []
    for split, skipped in splits:
        path = os.path.join(manifest.out_dir, f"{split.name}.tsv")
        write_scene_graphs(split, path, vocabulary)
        split_paths.append((split.name, path))
        counts.append(_count_split(split, skipped))
    checksums = tuple((path, file_checksum(path)) for _, path in sorted(manifest.inputs))
    report = ConversionReport(
        source_format=manifest.source_format,
        checksums=checksums,
        vocabulary_path=vocab_path,
        split_paths=tuple(split_paths),
        counts=tuple(counts),
    )
    with open(os.path.join(manifest.out_dir, "conversion.json"), "w",
              encoding="utf-8", newline="\n") as handle:
        handle.write(report.to_json())
    return report


def _vg_vocabulary(dicts: Mapping) -> tuple[Vocabulary, dict[int, int], dict[int, int]]:
    try:
        idx_to_label = dicts["idx_to_label"]
        idx_to_predicate = dicts["idx_to_predicate"]
    except KeyError as exc:
        raise AdapterError(f"label dictionary is missing key {exc}") from None
    object_ids = sorted(idx_to_label, key=int)
    predicate_ids = sorted(idx_to_predicate, key=int)
    vocabulary = Vocabulary(
        object_labels=tuple(idx_to_label[i] for i in object_ids),
        predicate_labels=tuple(idx_to_predicate[i] for i in predicate_ids),
    )
    object_map = {int(i): pos for pos, i in enumerate(object_ids)}
    predicate_map = {int(i): pos for pos, i in enumerate(predicate_ids)}
    return vocabulary, object_map, predicate_map


def _convert_vg(manifest: AdapterManifest) -> ConversionReport:
    import h5py

    graphs_path = manifest.path("graphs")
    dicts_path = manifest.path("dicts")
    if graphs_path is None or dicts_path is None:
        raise AdapterError("vg-sgg-h5 needs 'graphs' (HDF5) and 'dicts' (JSON) inputs")
    with open(dicts_path, "r", encoding="utf-8") as handle:
        dicts = json.load(handle)
    vocabulary, object_map, predicate_map = _vg_vocabulary(dicts)

    image_meta = None
    meta_path = manifest.path("image_meta")
    if meta_path is not None:
        with open(meta_path, "r", encoding="utf-8") as handle:
            image_meta = json.load(handle)

    with h5py.File(graphs_path, "r") as h5:
        try:
            split_flags = h5["split"][:]
            labels = h5["labels"][:].reshape(-1)
            boxes = h5["boxes_1024"][:]
            first_box = h5["img_to_first_box"][:]
            last_box = h5["img_to_last_box"][:]
            predicates = h5["predicates"][:].reshape(-1)
            relationships = h5["relationships"][:]
            first_rel = h5["img_to_first_rel"][:]
            last_rel = h5["img_to_last_rel"][:]
        except KeyError as exc:
            raise AdapterError(f"HDF5 file is missing dataset {exc}") from None

    split_names = {0: "train", 2: "val"}
    by_split: dict[str, list[SceneGraph]] = {"train": [], "val": []}
    skipped: dict[str, int] = {"train": 0, "val": 0}
    for row in range(len(split_flags)):
        split_name = split_names.get(int(split_flags[row]))
        if split_name is None:
            continue
        if image_meta is not None:
            meta = image_meta[row]
            image_id = str(meta["image_id"])
            scale = 1024.0 / max(float(meta["width"]), float(meta["height"]))
        else:
            image_id = f"vg_{row}"
            scale = 1.0

        objects = []
        b0, b1 = int(first_box[row]), int(last_box[row])
        if b0 >= 0:
            for b in range(b0, b1 + 1):
                cx, cy, w, h = (float(v) for v in boxes[b])
                try:
                    label = object_map[int(labels[b])]
                except KeyError:
                    raise AdapterError(f"box {b}: unknown object label id {int(labels[b])}") from None
                objects.append(DetectedObject(
                    box=BoundingBox((cx - w / 2.0) / scale, (cy - h / 2.0) / scale,
                                    (cx + w / 2.0) / scale, (cy + h / 2.0) / scale),
                    label=label,
                    score=1.0,
                ))

        relations = []
        r0, r1 = int(first_rel[row]), int(last_rel[row])
        if r0 >= 0:
            for r in range(r0, r1 + 1):
                sub = int(relationships[r][0]) - b0
                obj = int(relationships[r][1]) - b0
                try:
                    predicate = predicate_map[int(predicates[r])]
                except KeyError:
                    raise AdapterError(f"relation {r}: unknown predicate id {int(predicates[r])}") from None
                if sub == obj or not (0 <= sub < len(objects)) or not (0 <= obj < len(objects)):
                    skipped[split_name] += 1
                    continue
                relations.append(RelationPrediction(sub, obj, predicate, 1.0))

        by_split[split_name].append(SceneGraph(image_id, tuple(objects), tuple(relations)))

    splits = [
        (DatasetSplit(name, tuple(graphs)), skipped[name])
        for name, graphs in by_split.items()
    ]
    return _emit(manifest, vocabulary, splits)


def _read_class_descriptions(path: str) -> dict[str, str]:
    names: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.reader(handle):
            if not row or len(row) < 2:
                continue
            if row[0] == "LabelName":  # optional header
                continue
            names[row[0]] = row[1]
    return names


def _read_oi_rows(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)
    if rows:
        missing = [c for c in _OI_COLUMNS if c not in rows[0]]
        if missing:
            raise AdapterError(f"{path}: missing columns {missing} in first record {rows[0]!r}")
    return rows


def _convert_oi(manifest: AdapterManifest) -> ConversionReport:
    split_files = manifest.split_roles()
    if not split_files:
        raise AdapterError("oi-vrd-csv needs at least one 'split:<name>' input")
    desc_path = manifest.path("class_descriptions")
    display = _read_class_descriptions(desc_path) if desc_path else {}

    def object_name(mid: str) -> str:
        return display.get(mid, mid)

    rows_by_split = {name: _read_oi_rows(path) for name, path in split_files}

    object_labels: set[str] = set()
    predicate_labels: set[str] = set()
    for rows in rows_by_split.values():
        for row in rows:
            object_labels.add(object_name(row["LabelName1"]))
            object_labels.add(object_name(row["LabelName2"]))
            predicate_labels.add(row["RelationshipLabel"])
    try:
        vocabulary = Vocabulary(
            object_labels=tuple(sorted(object_labels)),
            predicate_labels=tuple(sorted(predicate_labels)),
        )
    except ValueError as exc:
        raise AdapterError(f"cannot build vocabulary: {exc}") from None

    splits = []
    seen_ids: dict[str, str] = {}
    for split_name, rows in rows_by_split.items():
        per_image: dict[str, list[dict]] = {}
        for row in rows:
            per_image.setdefault(row["ImageID"], []).append(row)
        graphs = []
        skipped = 0
        for image_id in per_image:
            if image_id in seen_ids:
                raise AdapterError(
                    f"image {image_id!r} appears in splits {seen_ids[image_id]!r} and {split_name!r}"
                )
            seen_ids[image_id] = split_name
            objects: list[DetectedObject] = []
            index: dict[tuple, int] = {}

            def instance(row: dict, suffix: str) -> int:
                try:
                    coords = (float(row[f"XMin{suffix}"]), float(row[f"YMin{suffix}"]),
                              float(row[f"XMax{suffix}"]), float(row[f"YMax{suffix}"]))
                except (ValueError, TypeError) as exc:
                    raise AdapterError(f"image {row['ImageID']}: bad coordinates: {exc}") from None
                label = vocabulary.object_index(object_name(row[f"LabelName{suffix}"]))
                key = (label,) + coords
                if key not in index:
                    index[key] = len(objects)
                    try:
                        objects.append(DetectedObject(box=BoundingBox(*coords), label=label, score=1.0))
                    except ValueError as exc:
                        raise AdapterError(f"image {row['ImageID']}: {exc}") from None
                return index[key]

            relations = []
            for row in per_image[image_id]:
                sub = instance(row, "1")
                obj = instance(row, "2")
                if sub == obj:
                    skipped += 1
                    continue
                predicate = vocabulary.predicate_index(row["RelationshipLabel"])
                relations.append(RelationPrediction(sub, obj, predicate, 1.0))
            graphs.append(SceneGraph(image_id, tuple(objects), tuple(relations)))
        splits.append((DatasetSplit(split_name, tuple(graphs)), skipped))

    return _emit(manifest, vocabulary, splits)


def convert(manifest: AdapterManifest) -> ConversionReport:
    """Convert one source distribution; returns paths, counts and checksums."""
    try:
        if manifest.source_format == "vg-sgg-h5":
            return _convert_vg(manifest)
        return _convert_oi(manifest)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AdapterError(f"cannot read source data: {exc}") from None
    except DuplicationError as exc:
        raise AdapterError(str(exc)) from None
