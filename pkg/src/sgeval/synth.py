"""Deterministic synthetic scenes with labeled error injection.

Scenes place objects in disjoint grid cells (margins of a quarter cell on
every side), so box identity is unambiguous and controlled jitter degrades a
box's own-IoU without creating cross-object matches.  Randomness comes from a
counter-based generator keyed by (seed, image index, stage): per-image output
never depends on generation order or thread count.

The degradation chain runs drop -> jitter -> flip for objects, then pair-drop
-> predicate-flip for relations, and logs every effective corruption.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .core import BoundingBox, DetectedObject, RelationPrediction, SceneGraph, Vocabulary
from .errors import ConfigError
from .ingest import DatasetSplit

# RNG stage ids; one Philox stream per (seed, image, stage).
_GEOM, _LABELS, _RELATIONS, _DROP, _JITTER, _FLIP, _PAIR_DROP, _PRED_FLIP = range(8)
_NUM_STAGES = 8

_REVERSE_RELATION_PROB = 0.3


def _rate(value: float, what: str) -> float:
    if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
        raise ConfigError(f"{what} must be in [0, 1], got {value!r}")
    return float(value)


@dataclass(frozen=True)
class DetectionNoise:
    drop_rate: float = 0.0
    box_jitter: float = 0.0
    label_flip_rate: float = 0.0

    def __post_init__(self):
        _rate(self.drop_rate, "drop_rate")
        _rate(self.label_flip_rate, "label_flip_rate")
        if not (isinstance(self.box_jitter, (int, float)) and self.box_jitter >= 0.0):
            raise ConfigError(f"box_jitter must be >= 0, got {self.box_jitter!r}")


@dataclass(frozen=True)
class RelationNoise:
    pair_drop_rate: float = 0.0
    predicate_flip_rate: float = 0.0

    def __post_init__(self):
        _rate(self.pair_drop_rate, "pair_drop_rate")
        _rate(self.predicate_flip_rate, "predicate_flip_rate")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_images: int = 10
    min_objects: int = 2
    max_objects: int = 6
    num_object_labels: int = 12
    num_predicate_labels: int = 6
    detection_noise: DetectionNoise = field(default_factory=DetectionNoise)
    relation_noise: RelationNoise = field(default_factory=RelationNoise)
    canvas_width: float = 1000.0
    canvas_height: float = 1000.0

    def __post_init__(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative int, got {self.seed!r}")
        if self.num_images < 0:
            raise ConfigError(f"num_images must be >= 0, got {self.num_images}")
        if self.min_objects < 1:
            raise ConfigError("images need at least one object")
        if self.max_objects < self.min_objects:
            raise ConfigError("max_objects must be >= min_objects")
        if self.num_object_labels < 1 or self.num_predicate_labels < 1:
            raise ConfigError("vocabulary sizes must be positive")
        if self.canvas_width <= 0 or self.canvas_height <= 0:
            raise ConfigError("canvas dimensions must be positive")

    @staticmethod
    def from_dict(data: dict) -> "SynthConfig":
        data = dict(data)
        if "objects_per_image" in data:
            lo, hi = data.pop("objects_per_image")
            data["min_objects"], data["max_objects"] = int(lo), int(hi)
        if "canvas" in data:
            w, h = data.pop("canvas")
            data["canvas_width"], data["canvas_height"] = float(w), float(h)
        if isinstance(data.get("detection_noise"), dict):
            data["detection_noise"] = DetectionNoise(**data["detection_noise"])
        if isinstance(data.get("relation_noise"), dict):
            data["relation_noise"] = RelationNoise(**data["relation_noise"])
        try:
            return SynthConfig(**data)
        except TypeError as exc:
            raise ConfigError(f"bad synth config: {exc}") from None

    @staticmethod
    def from_json(path: str | os.PathLike) -> "SynthConfig":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return SynthConfig.from_dict(json.load(handle))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse synth config {path}: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Corruption:
    """One effective, observable injection (stage in the documented order)."""

    image_id: str
    stage: str
    target: str
    before: str
    after: str


@dataclass(frozen=True)
class SynthResult:
    gt: DatasetSplit
    detections: DatasetSplit
    predictions: DatasetSplit
    corruptions: tuple[Corruption, ...]


@dataclass(frozen=True)
class ChainResult:
    """Progressively degraded inputs sharing one relation set per image."""

    gt: DatasetSplit
    predcls: DatasetSplit
    sgcls: DatasetSplit
    sgdet: DatasetSplit


def synth_vocabulary(config: SynthConfig) -> Vocabulary:
    return Vocabulary(
        object_labels=tuple(f"obj_{i:03d}" for i in range(config.num_object_labels)),
        predicate_labels=tuple(f"rel_{i:02d}" for i in range(config.num_predicate_labels)),
    )


def _rng(config: SynthConfig, image_index: int, stage: int) -> np.random.Generator:
    key = [np.uint64(config.seed), np.uint64(image_index * _NUM_STAGES + stage)]
    return np.random.Generator(np.random.Philox(key=key))


def _image_id(index: int) -> str:
    return f"img_{index:06d}"


def _box_str(box: BoundingBox) -> str:
    return f"{box.x1!r},{box.y1!r},{box.x2!r},{box.y2!r}"


@dataclass(frozen=True)
class _ImageParts:
    image_id: str
    gt_objects: tuple[DetectedObject, ...]
    gt_relations: tuple[RelationPrediction, ...]
    kept: tuple[bool, ...]
    jittered_boxes: tuple[BoundingBox, ...]
    flipped_labels: tuple[int, ...]
    noisy_relations: tuple[RelationPrediction, ...]  # original object indices
    corruptions: tuple[Corruption, ...]


def _build_image(config: SynthConfig, index: int, with_drops: bool) -> _ImageParts:
    image_id = _image_id(index)
    noise = config.detection_noise
    rel_noise = config.relation_noise

    geom = _rng(config, index, _GEOM)
    n = int(geom.integers(config.min_objects, config.max_objects + 1))
    grid = math.ceil(math.sqrt(n))
    cell_w = config.canvas_width / grid
    cell_h = config.canvas_height / grid

    label_rng = _rng(config, index, _LABELS)
    labels = [int(v) for v in label_rng.integers(0, config.num_object_labels, size=n)]

    objects = []
    for i in range(n):
        col, row = i % grid, i // grid
        bw = cell_w * (0.3 + 0.2 * float(geom.random()))
        bh = cell_h * (0.3 + 0.2 * float(geom.random()))
        x1 = col * cell_w + 0.25 * cell_w + float(geom.random()) * (0.5 * cell_w - bw)
        y1 = row * cell_h + 0.25 * cell_h + float(geom.random()) * (0.5 * cell_h - bh)
        box = BoundingBox(float(x1), float(y1), float(x1 + bw), float(y1 + bh))
        objects.append(DetectedObject(box=box, label=labels[i], score=1.0))

    rel_rng = _rng(config, index, _RELATIONS)
    relations = []
    for i in range(n - 1):
        predicate = int(rel_rng.integers(0, config.num_predicate_labels))
        relations.append(RelationPrediction(i, i + 1, predicate, 1.0))
        if float(rel_rng.random()) < _REVERSE_RELATION_PROB:
            reverse = int(rel_rng.integers(0, config.num_predicate_labels))
            relations.append(RelationPrediction(i + 1, i, reverse, 1.0))

    corruptions: list[Corruption] = []

    drop_rng = _rng(config, index, _DROP)
    drop_draws = drop_rng.random(n)
    if with_drops and noise.drop_rate > 0.0:
        kept = tuple(bool(drop_draws[i] >= noise.drop_rate) for i in range(n))
    else:
        kept = tuple(True for _ in range(n))
    for i in range(n):
        if not kept[i]:
            corruptions.append(Corruption(image_id, "drop", f"object:{i}",
                                          f"label={labels[i]}", "dropped"))

    jitter_rng = _rng(config, index, _JITTER)
    deltas = jitter_rng.uniform(-1.0, 1.0, size=(n, 4))
    jittered = []
    for i, obj in enumerate(objects):
        if noise.box_jitter <= 0.0:
            jittered.append(obj.box)
            continue
        bw = obj.box.x2 - obj.box.x1
        bh = obj.box.y2 - obj.box.y1
        jx = noise.box_jitter * bw
        jy = noise.box_jitter * bh
        xs = sorted((obj.box.x1 + float(deltas[i, 0]) * jx, obj.box.x2 + float(deltas[i, 1]) * jx))
        ys = sorted((obj.box.y1 + float(deltas[i, 2]) * jy, obj.box.y2 + float(deltas[i, 3]) * jy))
        box = BoundingBox(
            min(max(xs[0], 0.0), config.canvas_width),
            min(max(ys[0], 0.0), config.canvas_height),
            min(max(xs[1], 0.0), config.canvas_width),
            min(max(ys[1], 0.0), config.canvas_height),
        )
        jittered.append(box)
        if kept[i]:
            corruptions.append(Corruption(image_id, "jitter", f"object:{i}",
                                          _box_str(obj.box), _box_str(box)))

    flip_rng = _rng(config, index, _FLIP)
    flip_draws = flip_rng.random(n)
    flip_offsets = flip_rng.integers(0, max(config.num_object_labels - 1, 1), size=n)
    flipped = []
    for i in range(n):
        label = labels[i]
        if (config.num_object_labels > 1 and noise.label_flip_rate > 0.0
                and flip_draws[i] < noise.label_flip_rate):
            label = (labels[i] + 1 + int(flip_offsets[i])) % config.num_object_labels
            if kept[i]:
                corruptions.append(Corruption(image_id, "label_flip", f"object:{i}",
                                              f"label={labels[i]}", f"label={label}"))
        flipped.append(label)

    pair_rng = _rng(config, index, _PAIR_DROP)
    pair_draws = pair_rng.random(len(relations))
    pflip_rng = _rng(config, index, _PRED_FLIP)
    pflip_draws = pflip_rng.random(len(relations))
    pflip_offsets = pflip_rng.integers(0, max(config.num_predicate_labels - 1, 1),
                                       size=len(relations))
    noisy = []
    for r, rel in enumerate(relations):
        observable = kept[rel.subject_idx] and kept[rel.object_idx]
        target = f"relation:{rel.subject_idx}->{rel.object_idx}"
        if rel_noise.pair_drop_rate > 0.0 and pair_draws[r] < rel_noise.pair_drop_rate:
            if observable:
                corruptions.append(Corruption(image_id, "pair_drop", target,
                                              f"pred={rel.predicate}", "dropped"))
            continue
        predicate = rel.predicate
        if (config.num_predicate_labels > 1 and rel_noise.predicate_flip_rate > 0.0
                and pflip_draws[r] < rel_noise.predicate_flip_rate):
            predicate = (predicate + 1 + int(pflip_offsets[r])) % config.num_predicate_labels
            if observable:
                corruptions.append(Corruption(image_id, "predicate_flip", target,
                                              f"pred={rel.predicate}", f"pred={predicate}"))
        noisy.append(RelationPrediction(rel.subject_idx, rel.object_idx, predicate, 1.0))

    return _ImageParts(
        image_id=image_id,
        gt_objects=tuple(objects),
        gt_relations=tuple(relations),
        kept=kept,
        jittered_boxes=tuple(jittered),
        flipped_labels=tuple(flipped),
        noisy_relations=tuple(noisy),
        corruptions=tuple(corruptions),
    )


def _degraded_objects(parts: _ImageParts) -> tuple[tuple[DetectedObject, ...], dict[int, int]]:
    objects = []
    index_map: dict[int, int] = {}
    for i, obj in enumerate(parts.gt_objects):
        if not parts.kept[i]:
            continue
        index_map[i] = len(objects)
        objects.append(DetectedObject(box=parts.jittered_boxes[i],
                                      label=parts.flipped_labels[i], score=1.0))
    return tuple(objects), index_map


def generate(config: SynthConfig) -> SynthResult:
    """Generate ground truth plus degraded detections and predictions.

    The three splits share image ids; the corruption log lists every injected
    change that is visible in the degraded outputs (a dropped object's other
    corruptions are subsumed by its drop entry).
    """
    gt_graphs = []
    det_graphs = []
    pred_graphs = []
    corruptions: list[Corruption] = []
    for index in range(config.num_images):
        parts = _build_image(config, index, with_drops=True)
        gt_graphs.append(SceneGraph(parts.image_id, parts.gt_objects, parts.gt_relations))
        objects, index_map = _degraded_objects(parts)
        det_graphs.append(SceneGraph(parts.image_id, objects, ()))
        remapped = tuple(
            RelationPrediction(index_map[rel.subject_idx], index_map[rel.object_idx],
                               rel.predicate, rel.score)
            for rel in parts.noisy_relations
            if rel.subject_idx in index_map and rel.object_idx in index_map
        )
        pred_graphs.append(SceneGraph(parts.image_id, objects, remapped))
        corruptions.extend(parts.corruptions)
    return SynthResult(
        gt=DatasetSplit("synth-gt", tuple(gt_graphs)),
        detections=DatasetSplit("synth-detections", tuple(det_graphs)),
        predictions=DatasetSplit("synth-predictions", tuple(pred_graphs)),
        corruptions=tuple(corruptions),
    )


def degradation_chain(config: SynthConfig) -> ChainResult:
    """Build predcls / sgcls / sgdet inputs that only ever lose information.

    All three variants share one relation list per image (the noisy relation
    set), object scores stay 1.0, and drops are disabled so ranks stay
    aligned: sgcls only flips labels on GT boxes, sgdet additionally jitters
    the boxes.  Matched triplet sets are therefore nested across the tasks.
    """
    gt_graphs = []
    predcls_graphs = []
    sgcls_graphs = []
    sgdet_graphs = []
    for index in range(config.num_images):
        parts = _build_image(config, index, with_drops=False)
        gt_graphs.append(SceneGraph(parts.image_id, parts.gt_objects, parts.gt_relations))
        predcls_graphs.append(SceneGraph(parts.image_id, parts.gt_objects, parts.noisy_relations))
        sgcls_objects = tuple(
            DetectedObject(box=obj.box, label=parts.flipped_labels[i], score=1.0)
            for i, obj in enumerate(parts.gt_objects)
        )
        sgcls_graphs.append(SceneGraph(parts.image_id, sgcls_objects, parts.noisy_relations))
        sgdet_objects = tuple(
            DetectedObject(box=parts.jittered_boxes[i], label=parts.flipped_labels[i], score=1.0)
            for i in range(len(parts.gt_objects))
        )
        sgdet_graphs.append(SceneGraph(parts.image_id, sgdet_objects, parts.noisy_relations))
    return ChainResult(
        gt=DatasetSplit("chain-gt", tuple(gt_graphs)),
        predcls=DatasetSplit("chain-predcls", tuple(predcls_graphs)),
        sgcls=DatasetSplit("chain-sgcls", tuple(sgcls_graphs)),
        sgdet=DatasetSplit("chain-sgdet", tuple(sgdet_graphs)),
    )


def write_corruptions(corruptions: Iterable[Corruption], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("image_id\tstage\ttarget\tbefore\tafter\n")
        for c in corruptions:
            handle.write(f"{c.image_id}\t{c.stage}\t{c.target}\t{c.before}\t{c.after}\n")
