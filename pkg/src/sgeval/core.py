"""Core domain types: boxes, labelled detections, scene graphs, eval settings.

Everything here is immutable after construction and safe to share across
worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import ConfigError, VocabularyError

TASKS = ("predcls", "sgcls", "sgdet")
MODES = ("constrained", "unconstrained")


def _check_unit(value: float, what: str) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ValueError(f"{what} must be in [0, 1], got {value!r}")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, xyxy with x1<=x2, y1<=y2.

    Areas use the exclusive convention (x2-x1, no +1).
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite numbers, got {coords!r}")
        if not (self.x1 <= self.x2 and self.y1 <= self.y2):
            raise ValueError(f"inverted box: ({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered object and predicate label sets; index <-> label is a bijection."""

    object_labels: tuple[str, ...]
    predicate_labels: tuple[str, ...]
    _object_index: dict = field(init=False, repr=False, compare=False)
    _predicate_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "object_labels", tuple(self.object_labels))
        object.__setattr__(self, "predicate_labels", tuple(self.predicate_labels))
        obj_idx = {label: i for i, label in enumerate(self.object_labels)}
        pred_idx = {label: i for i, label in enumerate(self.predicate_labels)}
        if len(obj_idx) != len(self.object_labels):
            raise ValueError("duplicate object label")
        if len(pred_idx) != len(self.predicate_labels):
            raise ValueError("duplicate predicate label")
        object.__setattr__(self, "_object_index", obj_idx)
        object.__setattr__(self, "_predicate_index", pred_idx)

    @property
    def num_objects(self) -> int:
        return len(self.object_labels)

    @property
    def num_predicates(self) -> int:
        return len(self.predicate_labels)

    def object_index(self, label: str) -> int:
        try:
            return self._object_index[label]
        except KeyError:
            raise VocabularyError(label, "object label") from None

    def predicate_index(self, label: str) -> int:
        try:
            return self._predicate_index[label]
        except KeyError:
            raise VocabularyError(label, "predicate") from None


@dataclass(frozen=True)
class DetectedObject:
    """A detected object instance: box, class label index and confidence."""

    box: BoundingBox
    label: int
    score: float = 1.0

    def __post_init__(self):
        if not isinstance(self.label, int) or self.label < 0:
            raise ValueError(f"object label index must be a non-negative int, got {self.label!r}")
        _check_unit(self.score, "object score")


@dataclass(frozen=True)
class RelationPrediction:
    """A (subject, predicate, object) prediction over an image's object list."""

    subject_idx: int
    object_idx: int
    predicate: int
    score: float = 1.0

    def __post_init__(self):
        for name in ("subject_idx", "object_idx", "predicate"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be a non-negative int, got {value!r}")
        if self.subject_idx == self.object_idx:
            raise ValueError(f"relation subject and object coincide (index {self.subject_idx})")
        _check_unit(self.score, "relation score")


@dataclass(frozen=True)
class SceneGraph:
    """Per-image collection of objects and the relations between them.

    Used for both predictions and ground truth; ground truth carries
    score 1.0 everywhere.
    """

    image_id: str
    objects: tuple[DetectedObject, ...] = ()
    relations: tuple[RelationPrediction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relations", tuple(self.relations))
        n = len(self.objects)
        for rel in self.relations:
            if rel.subject_idx >= n or rel.object_idx >= n:
                raise ValueError(
                    f"image {self.image_id}: relation references object "
                    f"{max(rel.subject_idx, rel.object_idx)} but only {n} objects exist"
                )


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation settings: task, post-processing mode, K cutoffs, IoU threshold."""

    task: str = "sgdet"
    mode: str = "constrained"
    max_predicates_per_pair: int = 1
    k_values: tuple[int, ...] = (20, 50, 100)
    iou_threshold: float = 0.5

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "constrained":
            object.__setattr__(self, "max_predicates_per_pair", 1)
        if not isinstance(self.max_predicates_per_pair, int) or self.max_predicates_per_pair < 1:
            raise ConfigError(
                f"max_predicates_per_pair must be a positive int, got {self.max_predicates_per_pair!r}"
            )
        ks = tuple(self.k_values)
        if not ks or any(not isinstance(k, int) or k < 1 for k in ks):
            raise ConfigError(f"k_values must be positive ints, got {self.k_values!r}")
        object.__setattr__(self, "k_values", tuple(sorted(set(ks))))
        if not (0.0 <= self.iou_threshold <= 1.0):
            raise ConfigError(f"iou_threshold must be in [0, 1], got {self.iou_threshold!r}")


def triplet_score(rel: RelationPrediction, objects: Sequence[DetectedObject]) -> float:
    """Ranking score of a relation: subject score * relation score * object score.

    predcls inputs carry unit object scores, so there the ranking reduces to
    the predicate score.
    """
    return objects[rel.subject_idx].score * rel.score * objects[rel.object_idx].score


def apply_mode(graph: SceneGraph, config: EvalConfig) -> SceneGraph:
    """Filter each ordered object pair down to its top predicates.

    Keeps the best ``max_predicates_per_pair`` relations per (subject, object)
    pair by relation score (exactly 1 in constrained mode). Ties break by
    ascending predicate index; survivors keep their original relative order.
    Idempotent.
    """
    limit = 1 if config.mode == "constrained" else config.max_predicates_per_pair
    by_pair: dict[tuple[int, int], list[int]] = {}
    for i, rel in enumerate(graph.relations):
        by_pair.setdefault((rel.subject_idx, rel.object_idx), []).append(i)
    keep: set[int] = set()
    for indices in by_pair.values():
        ranked = sorted(indices, key=lambda i: (-graph.relations[i].score, graph.relations[i].predicate))
        keep.update(ranked[:limit])
    survivors = tuple(rel for i, rel in enumerate(graph.relations) if i in keep)
    return replace(graph, relations=survivors)
