"""Cross-model analytics: prediction similarity and perfect-ensemble accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import EvalConfig, apply_mode
from .errors import ConfigError, MetricUndefinedError, TaskContractError
from .ingest import DatasetSplit
from .matching import match_triplets, ranked_triplets
from .vg import check_alignment, check_task_contract

_CONSTRAINED = EvalConfig(task="sgdet", mode="constrained")

MATRIX_KINDS = ("similarity", "ensemble_accuracy")


def _identity_set(split: DatasetSplit, ndigits: int = 2) -> set[tuple]:
    """Triplet identities over a split: canonicalized boxes + labels + predicate.

    Coordinates round to ``ndigits`` decimals; models sharing one detector
    therefore produce identical instance identities.  Constrained filtering is
    applied first so each pair contributes its single best predicate.
    """
    identities = set()
    for graph in split:
        filtered = apply_mode(graph, _CONSTRAINED)
        for rel in filtered.relations:
            sub = graph.objects[rel.subject_idx]
            obj = graph.objects[rel.object_idx]
            identities.add((
                graph.image_id,
                round(sub.box.x1, ndigits), round(sub.box.y1, ndigits),
                round(sub.box.x2, ndigits), round(sub.box.y2, ndigits),
                sub.label,
                rel.predicate,
                round(obj.box.x1, ndigits), round(obj.box.y1, ndigits),
                round(obj.box.x2, ndigits), round(obj.box.y2, ndigits),
                obj.label,
            ))
    return identities


def _iou_intersection(a: DatasetSplit, b: DatasetSplit, iou_threshold: float) -> tuple[int, int, int]:
    """(matched, |A|, |B|) where identity tolerates IoU-level box noise."""
    matched = total_a = total_b = 0
    for graph in a:
        a_triplets = ranked_triplets(apply_mode(graph, _CONSTRAINED))
        b_triplets = ranked_triplets(apply_mode(b.get(graph.image_id), _CONSTRAINED))
        result = match_triplets(a_triplets, b_triplets, "triplet", iou_threshold)
        matched += len(result.matched_pairs)
        total_a += len(a_triplets)
        total_b += len(b_triplets)
    return matched, total_a, total_b


def pairwise_similarity(a: DatasetSplit, b: DatasetSplit, iou_identity: bool = False,
                        iou_threshold: float = 0.5) -> float:
    """Jaccard overlap of two models' triplet sets, 0-100.

    A triplet identity is (subject instance, predicate, object instance) with
    instances keyed by exact canonicalized box + label.  ``iou_identity``
    switches to IoU-based instance matching for heterogeneous detectors.
    """
    check_alignment(a, b)
    if iou_identity:
        matched, total_a, total_b = _iou_intersection(a, b, iou_threshold)
        union = total_a + total_b - matched
        return 100.0 if union == 0 else 100.0 * matched / union
    set_a = _identity_set(a)
    set_b = _identity_set(b)
    union = set_a | set_b
    if not union:
        return 100.0
    return 100.0 * len(set_a & set_b) / len(union)


def _pair_predicates(split: DatasetSplit, gt: DatasetSplit) -> dict[tuple[str, int, int], int]:
    table: dict[tuple[str, int, int], int] = {}
    for graph in split:
        try:
            check_task_contract(graph, gt.get(graph.image_id), "predcls")
        except TaskContractError as exc:
            raise TaskContractError(f"ensemble accuracy needs predcls inputs: {exc}") from None
        filtered = apply_mode(graph, _CONSTRAINED)
        for rel in filtered.relations:
            table[(graph.image_id, rel.subject_idx, rel.object_idx)] = rel.predicate
    return table


def ensemble_accuracy(a: DatasetSplit, b: DatasetSplit, gt: DatasetSplit) -> float:
    """Fraction of GT relations either model labels correctly, 0-100.

    Both inputs must be predcls predictions over the GT object lists; each
    pair contributes its constrained top-1 predicate.  With ``a`` equal to
    ``b`` this is the single-model predicate accuracy.
    """
    check_alignment(a, gt)
    check_alignment(b, gt)
    choices_a = _pair_predicates(a, gt)
    choices_b = _pair_predicates(b, gt)
    covered = 0
    total = 0
    for graph in gt:
        for rel in graph.relations:
            key = (graph.image_id, rel.subject_idx, rel.object_idx)
            total += 1
            if choices_a.get(key) == rel.predicate or choices_b.get(key) == rel.predicate:
                covered += 1
    if total == 0:
        raise MetricUndefinedError("ground truth has no relations; accuracy is undefined")
    return 100.0 * covered / total


@dataclass(frozen=True)
class ComparisonMatrix:
    kind: str
    names: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.kind not in MATRIX_KINDS:
            raise ConfigError(f"matrix kind must be one of {MATRIX_KINDS}, got {self.kind!r}")
        if any(len(row) != len(self.names) for row in self.values):
            raise ConfigError("comparison matrix must be square")

    def value(self, i: int, j: int) -> float:
        return self.values[i][j]


def similarity_matrix(named_splits: Sequence[tuple[str, DatasetSplit]],
                      iou_identity: bool = False) -> ComparisonMatrix:
    names = tuple(name for name, _ in named_splits)
    rows = []
    for i, (_, a) in enumerate(named_splits):
        row = []
        for j, (_, b) in enumerate(named_splits):
            if j < i:
                row.append(rows[j][i])
            elif j == i:
                row.append(100.0)
            else:
                row.append(pairwise_similarity(a, b, iou_identity=iou_identity))
        rows.append(row)
    return ComparisonMatrix(kind="similarity", names=names,
                            values=tuple(tuple(row) for row in rows))


def ensemble_matrix(named_splits: Sequence[tuple[str, DatasetSplit]],
                    gt: DatasetSplit) -> ComparisonMatrix:
    names = tuple(name for name, _ in named_splits)
    rows = []
    for i, (_, a) in enumerate(named_splits):
        row = []
        for j, (_, b) in enumerate(named_splits):
            if j < i:
                row.append(rows[j][i])
            else:
                row.append(ensemble_accuracy(a, b, gt))
        rows.append(row)
    return ComparisonMatrix(kind="ensemble_accuracy", names=names,
                            values=tuple(tuple(row) for row in rows))


def format_matrix(matrix: ComparisonMatrix) -> str:
    lines = ["model\t" + "\t".join(matrix.names)]
    for name, row in zip(matrix.names, matrix.values):
        lines.append(name + "\t" + "\t".join(f"{v:.4f}" for v in row))
    return "\n".join(lines) + "\n"
