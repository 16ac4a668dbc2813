"""Geometric and label matching: IoU, phrase boxes, greedy triplet assignment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import BoundingBox, SceneGraph, triplet_score
from .errors import ConfigError, ContractError

# Matching criteria:
#   triplet      - subject/object labels + predicate, both boxes at IoU >= t
#   phrase       - same labels, single IoU test on the enclosing (phrase) boxes
#   pair         - subject/object labels only, both boxes at IoU >= t
#   phrase_pair  - subject/object labels only, enclosing boxes at IoU >= t
CRITERIA = ("triplet", "phrase", "pair", "phrase_pair")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union has no area."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def phrase_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Smallest axis-aligned box enclosing both inputs."""
    return BoundingBox(
        x1=min(a.x1, b.x1),
        y1=min(a.y1, b.y1),
        x2=max(a.x2, b.x2),
        y2=max(a.y2, b.y2),
    )


@dataclass(frozen=True)
class Triplet:
    """A relation with its endpoint boxes and labels resolved.

    ``subject_idx``/``object_idx`` are positions in the source image's object
    list; they drive exact matching for tasks evaluated on ground-truth boxes.
    """

    subject_box: BoundingBox
    subject_label: int
    predicate: int
    object_box: BoundingBox
    object_label: int
    score: float
    subject_idx: int
    object_idx: int


def resolve_triplets(graph: SceneGraph) -> list[Triplet]:
    """Resolve every relation of a graph into a Triplet, in relation order."""
    out = []
    for rel in graph.relations:
        sub = graph.objects[rel.subject_idx]
        obj = graph.objects[rel.object_idx]
        out.append(Triplet(
            subject_box=sub.box,
            subject_label=sub.label,
            predicate=rel.predicate,
            object_box=obj.box,
            object_label=obj.label,
            score=triplet_score(rel, graph.objects),
            subject_idx=rel.subject_idx,
            object_idx=rel.object_idx,
        ))
    return out


def ranked_triplets(graph: SceneGraph) -> list[Triplet]:
    """Resolve and rank by descending score.

    Ties break by (subject index, object index, predicate) ascending so the
    ranking is invariant to the input permutation of equal-score relations.
    """
    return sorted(
        resolve_triplets(graph),
        key=lambda t: (-t.score, t.subject_idx, t.object_idx, t.predicate),
    )


@dataclass(frozen=True)
class MatchResult:
    """Outcome of a greedy assignment of predictions to ground truth.

    ``matched_pairs`` holds (prediction index, GT index) in prediction rank
    order; every index appears at most once on each side.
    """

    matched_pairs: tuple[tuple[int, int], ...]
    unmatched_gt: tuple[int, ...]

    def matched_at(self, k: int) -> int:
        """Number of matches among the top-k ranked predictions."""
        return sum(1 for p, _ in self.matched_pairs if p < k)


def match_triplets(
    preds: Sequence[Triplet],
    gts: Sequence[Triplet],
    criterion: str = "triplet",
    iou_threshold: float = 0.5,
    use_indices: bool = False,
) -> MatchResult:
    """Greedily assign ranked predictions to ground-truth triplets.

    Predictions are scanned in the given order (which must be descending by
    score); each one claims the best still-unmatched eligible GT.  Eligibility
    requires equal subject and object labels, the predicate too under the
    triplet/phrase criteria, and the criterion's IoU test at ``iou_threshold``.
    With ``use_indices`` (tasks evaluated on ground-truth boxes) the geometric
    test is replaced by exact object-index equality.

    Among eligible GTs the one maximizing min(subject IoU, object IoU) wins
    (phrase criteria: the phrase-box IoU); remaining ties go to the lowest GT
    index.
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    for i in range(1, len(preds)):
        if preds[i].score > preds[i - 1].score:
            raise ContractError(
                f"predictions must be sorted by descending score (position {i})"
            )

    needs_predicate = criterion in ("triplet", "phrase")
    enclosing = criterion in ("phrase", "phrase_pair")

    taken = [False] * len(gts)
    pairs: list[tuple[int, int]] = []
    for pi, pred in enumerate(preds):
        pred_phrase = phrase_box(pred.subject_box, pred.object_box) if enclosing else None
        best_quality = -1.0
        best_gt = -1
        for gi, gt in enumerate(gts):
            if taken[gi]:
                continue
            if pred.subject_label != gt.subject_label or pred.object_label != gt.object_label:
                continue
            if needs_predicate and pred.predicate != gt.predicate:
                continue
            if use_indices:
                if pred.subject_idx != gt.subject_idx or pred.object_idx != gt.object_idx:
                    continue
                quality = 1.0
            elif enclosing:
                quality = iou(pred_phrase, phrase_box(gt.subject_box, gt.object_box))
                if quality < iou_threshold:
                    continue
            else:
                sub_iou = iou(pred.subject_box, gt.subject_box)
                if sub_iou < iou_threshold:
                    continue
                obj_iou = iou(pred.object_box, gt.object_box)
                if obj_iou < iou_threshold:
                    continue
                quality = min(sub_iou, obj_iou)
            if quality > best_quality:
                best_quality = quality
                best_gt = gi
        if best_gt >= 0:
            taken[best_gt] = True
            pairs.append((pi, best_gt))

    unmatched = tuple(gi for gi, used in enumerate(taken) if not used)
    return MatchResult(matched_pairs=tuple(pairs), unmatched_gt=unmatched)
