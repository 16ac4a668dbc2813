"""Ground-truth-substitution harness.

Decomposes end-to-end error into three sources by evaluating the same
relation predictor against progressively idealized inputs:

  predicted objects  ->  gt objects  ->  gt objects + gt pairs

Every level re-runs the relation source on that level's object list, so the
harness works with any predictor that consumes detections.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

from .core import EvalConfig, RelationPrediction, SceneGraph
from .errors import AlignmentError, ConfigError, HarnessOrderError
from .freq import FrequencyPrior, predict_with_prior
from .ingest import DatasetSplit
from .matching import iou
from .oi import oi_evaluate
from .vg import check_alignment, vg_recall


class AblationLevel(Enum):
    PREDICTED_OBJECTS = "predicted"
    GT_OBJECTS = "gt-objects"
    GT_OBJECTS_GT_PAIRS = "gt-pairs"

    @staticmethod
    def parse(name: str) -> "AblationLevel":
        for level in AblationLevel:
            if level.value == name:
                return level
        raise ConfigError(f"unknown ablation level {name!r}")


class RelationSource:
    """Produces relations for an arbitrary object list of a known image."""

    name = "source"

    def __init__(self, num_predicates: int):
        if num_predicates < 1:
            raise ConfigError("relation source needs at least one predicate label")
        self.num_predicates = num_predicates

    def relations_for(self, objects_graph: SceneGraph) -> SceneGraph:
        raise NotImplementedError

    def pair_distribution(self, objects_graph: SceneGraph, subject_idx: int,
                          object_idx: int) -> list[tuple[int, float]]:
        """Predicate distribution for one ordered pair; may be empty."""
        raise NotImplementedError

    def fallback_distribution(self) -> list[tuple[int, float]]:
        # Uniform over the vocabulary; keeps gt-pair insertion total even for
        # pairs the source has never seen.
        p = 1.0 / self.num_predicates
        return [(predicate, p) for predicate in range(self.num_predicates)]


class FrequencySource(RelationSource):
    """Relation source backed by a frequency prior."""

    def __init__(self, prior: FrequencyPrior, config: EvalConfig, num_predicates: int,
                 use_raw_counts: bool = False):
        super().__init__(num_predicates)
        self.prior = prior
        self.config = config
        self.use_raw_counts = use_raw_counts
        self.name = prior.variant

    def relations_for(self, objects_graph: SceneGraph) -> SceneGraph:
        return predict_with_prior(objects_graph, self.prior, self.config,
                                  use_raw_counts=self.use_raw_counts)

    def pair_distribution(self, objects_graph, subject_idx, object_idx):
        sub = objects_graph.objects[subject_idx]
        obj = objects_graph.objects[object_idx]
        return self.prior.probabilities(sub.label, obj.label)


class PredictionFileSource(RelationSource):
    """Relation source backed by a stored prediction split.

    When asked for relations on the exact object list it was built from, it
    replays its predictions verbatim.  For any other object list it transfers
    each stored object onto the overlapping target box with the highest IoU
    and re-expresses its relations there; relations whose endpoints cannot be
    transferred (or collapse onto one object) are dropped.
    """

    name = "file"

    def __init__(self, split: DatasetSplit, num_predicates: int):
        super().__init__(num_predicates)
        self.split = split

    def _transfer(self, stored: SceneGraph, target: SceneGraph) -> SceneGraph:
        if stored.objects == target.objects:
            return replace(target, relations=stored.relations)
        mapping: dict[int, int] = {}
        for k, source_obj in enumerate(stored.objects):
            best_iou = 0.0
            best_j = -1
            for j, target_obj in enumerate(target.objects):
                overlap = iou(source_obj.box, target_obj.box)
                if overlap > best_iou:
                    best_iou = overlap
                    best_j = j
            if best_j >= 0:
                mapping[k] = best_j
        merged: dict[tuple[int, int, int], RelationPrediction] = {}
        for rel in stored.relations:
            sub = mapping.get(rel.subject_idx)
            obj = mapping.get(rel.object_idx)
            if sub is None or obj is None or sub == obj:
                continue
            key = (sub, obj, rel.predicate)
            moved = RelationPrediction(subject_idx=sub, object_idx=obj,
                                       predicate=rel.predicate, score=rel.score)
            if key not in merged or moved.score > merged[key].score:
                merged[key] = moved
        relations = tuple(merged[key] for key in sorted(merged))
        return replace(target, relations=relations)

    def relations_for(self, objects_graph: SceneGraph) -> SceneGraph:
        try:
            stored = self.split.get(objects_graph.image_id)
        except KeyError:
            raise AlignmentError(
                f"prediction file has no image {objects_graph.image_id!r}"
            ) from None
        return self._transfer(stored, objects_graph)

    def pair_distribution(self, objects_graph, subject_idx, object_idx):
        transferred = self.relations_for(objects_graph)
        scored = [
            (rel.predicate, rel.score)
            for rel in transferred.relations
            if rel.subject_idx == subject_idx and rel.object_idx == object_idx
        ]
        total = sum(score for _, score in scored)
        if total <= 0.0:
            return []
        return sorted(((p, s / total) for p, s in scored), key=lambda item: (-item[1], item[0]))


def substitute_gt_objects(pred: SceneGraph, gt: SceneGraph) -> SceneGraph:
    """Swap in the ground-truth object list (unit scores), dropping relations.

    The relations are intentionally empty: the harness re-runs the relation
    source on the substituted objects.  Idempotent.
    """
    if pred.image_id != gt.image_id:
        raise AlignmentError(f"cannot substitute across images {pred.image_id!r} / {gt.image_id!r}")
    objects = tuple(replace(o, score=1.0) for o in gt.objects)
    return SceneGraph(image_id=gt.image_id, objects=objects, relations=())


def restrict_to_gt_pairs(pred: SceneGraph, gt: SceneGraph, source: RelationSource,
                         config: EvalConfig) -> SceneGraph:
    """Keep predictions on GT pairs only and fill in every missed GT pair.

    Inserted pairs carry the source's predicate distribution (uniform fallback
    when the source has none), truncated to the pair budget, so that pair
    proposals become perfect at this level by construction.
    """
    if pred.objects != gt.objects:
        raise HarnessOrderError(
            f"image {gt.image_id}: gt-pair restriction requires gt objects; "
            "run substitute_gt_objects first"
        )
    gt_pairs = {(rel.subject_idx, rel.object_idx) for rel in gt.relations}
    kept = [rel for rel in pred.relations
            if (rel.subject_idx, rel.object_idx) in gt_pairs]
    covered = {(rel.subject_idx, rel.object_idx) for rel in kept}
    limit = 1 if config.mode == "constrained" else config.max_predicates_per_pair
    inserted: list[RelationPrediction] = []
    for sub, obj in sorted(gt_pairs - covered):
        distribution = source.pair_distribution(pred, sub, obj)
        if not distribution:
            distribution = source.fallback_distribution()
        for predicate, prob in distribution[:limit]:
            inserted.append(RelationPrediction(
                subject_idx=sub, object_idx=obj, predicate=predicate, score=prob,
            ))
    return replace(pred, relations=tuple(kept + inserted))


@dataclass(frozen=True)
class AblationResult:
    metric: str
    reports: tuple[tuple[AblationLevel, dict[str, float]], ...]
    deltas: tuple[tuple[str, dict[str, float]], ...]

    def report(self, level: AblationLevel) -> dict[str, float]:
        for key, table in self.reports:
            if key == level:
                return table
        raise KeyError(level)

    def as_table(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for level, table in self.reports:
            for key, value in table.items():
                out[f"{level.value}.{key}"] = value
        for name, table in self.deltas:
            for key, value in table.items():
                out[f"delta.{name}.{key}"] = value
        return out


def _level_split(level: AblationLevel, gt: DatasetSplit, detections: DatasetSplit,
                 source: RelationSource, config: EvalConfig) -> DatasetSplit:
    graphs = []
    for gt_graph in gt:
        det_graph = detections.get(gt_graph.image_id)
        if level is AblationLevel.PREDICTED_OBJECTS:
            base = replace(det_graph, relations=())
            graphs.append(source.relations_for(base))
        else:
            base = substitute_gt_objects(det_graph, gt_graph)
            with_relations = source.relations_for(base)
            if level is AblationLevel.GT_OBJECTS_GT_PAIRS:
                with_relations = restrict_to_gt_pairs(with_relations, gt_graph, source, config)
            graphs.append(with_relations)
    return DatasetSplit(name=f"{gt.name}:{level.value}", graphs=tuple(graphs))


def _evaluate(split: DatasetSplit, gt: DatasetSplit, metric: str, config: EvalConfig,
              threads: int) -> dict[str, float]:
    if metric == "oi":
        return oi_evaluate(split, gt, config, threads=threads).as_table()
    if metric == "vg":
        # Levels swap object lists, so only IoU-based matching is comparable
        # across them.
        vg_config = replace(config, task="sgdet")
        return vg_recall(split, gt, vg_config, threads=threads).as_table()
    raise ConfigError(f"metric must be 'vg' or 'oi', got {metric!r}")


def run_ablation(gt: DatasetSplit, detections: DatasetSplit, source: RelationSource,
                 levels: Sequence[AblationLevel], metric: str, config: EvalConfig,
                 threads: int = 1) -> AblationResult:
    """Evaluate the relation source at each requested idealization level.

    Emits one report per level plus the field-wise delta between consecutive
    levels (the error mass attributed to the information restored between
    them).
    """
    if not levels:
        raise ConfigError("at least one ablation level is required")
    check_alignment(detections, gt)
    reports = []
    for level in levels:
        split = _level_split(level, gt, detections, source, config)
        reports.append((level, _evaluate(split, gt, metric, config, threads)))
    deltas = []
    for (prev_level, prev), (next_level, cur) in zip(reports, reports[1:]):
        name = f"{prev_level.value}->{next_level.value}"
        deltas.append((name, {key: cur[key] - prev[key] for key in prev if key in cur}))
    return AblationResult(metric=metric, reports=tuple(reports), deltas=tuple(deltas))
