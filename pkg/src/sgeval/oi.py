"""Open-Images-style relationship metrics.

Produces Recall@50, per-predicate average precision aggregated into
weighted/unweighted mAP for both triplet and phrase criteria, box-pair
proposal recalls, and the composite challenge score

    Score = 0.2 * Recall@50 + 0.4 * wmAP(triplet) + 0.4 * wmAP(phrase).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import EvalConfig, SceneGraph, apply_mode
from .errors import ContractError, MetricUndefinedError
from .ingest import DatasetSplit
from .matching import match_triplets, ranked_triplets, resolve_triplets
from .parallel import parallel_map
from .vg import check_alignment

RECALL_K = 50


@dataclass(frozen=True)
class OiReport:
    """All fields on a 0-100 scale."""

    score: float
    recall_at_50: float
    wmap_triplet: float
    map_triplet: float
    wmap_phrase: float
    map_phrase: float
    triplet_proposal_recall: float
    phrase_proposal_recall: float

    def as_table(self) -> dict[str, float]:
        return {
            "score": self.score,
            "recall_at_50": self.recall_at_50,
            "wmap_triplet": self.wmap_triplet,
            "map_triplet": self.map_triplet,
            "wmap_phrase": self.wmap_phrase,
            "map_phrase": self.map_phrase,
            "triplet_proposal_recall": self.triplet_proposal_recall,
            "phrase_proposal_recall": self.phrase_proposal_recall,
        }


def composite_score(recall_at_50: float, wmap_triplet: float, wmap_phrase: float) -> float:
    return 0.2 * recall_at_50 + 0.4 * wmap_triplet + 0.4 * wmap_phrase


def average_precision(ranked_outcomes: Sequence[tuple[float, bool]], num_gt: int) -> float:
    """All-points interpolated AP over a ranked true/false-positive list.

    The precision curve is made monotone from the right and the area is
    accumulated at every recall increment (continuous-area interpolation).
    Input must be sorted by descending score; each entry is one ranked
    detection.
    """
    if num_gt < 0:
        raise ContractError(f"num_gt must be >= 0, got {num_gt}")
    flags = []
    last = None
    for i, (score, is_tp) in enumerate(ranked_outcomes):
        if last is not None and score > last:
            raise ContractError(f"outcomes must be sorted by descending score (position {i})")
        last = score
        flags.append(bool(is_tp))
    positives = sum(flags)
    if num_gt == 0:
        if positives:
            raise ContractError("true positives claimed with num_gt = 0")
        return 0.0
    if positives > num_gt:
        raise ContractError(f"{positives} true positives exceed num_gt = {num_gt}")
    if not flags:
        return 0.0

    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    ranks = np.arange(1, len(flags) + 1, dtype=np.float64)
    recall = tp / num_gt
    precision = tp / ranks
    # Monotone envelope from the right.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * envelope))


def wmap(ap_by_predicate: Mapping[int, float], gt_count_by_predicate: Mapping[int, int]) -> float:
    """Frequency-weighted mean AP, 0-100; zero-count predicates carry no weight."""
    total = 0
    acc = 0.0
    for predicate, count in gt_count_by_predicate.items():
        if count < 0:
            raise ContractError(f"negative GT count for predicate {predicate}")
        if count == 0:
            continue
        acc += ap_by_predicate.get(predicate, 0.0) * count
        total += count
    if total == 0:
        raise MetricUndefinedError("all predicate GT counts are zero; wmAP is undefined")
    return 100.0 * acc / total


def _mean_ap(ap_by_predicate: Mapping[int, float], counts: Mapping[int, int]) -> float:
    present = [p for p, n in counts.items() if n > 0]
    if not present:
        raise MetricUndefinedError("all predicate GT counts are zero; mAP is undefined")
    return 100.0 * sum(ap_by_predicate.get(p, 0.0) for p in present) / len(present)


@dataclass(frozen=True)
class _ImageOutcome:
    image_id: str
    gt_count: int
    matched_at_50: int
    pair_matched: int
    phrase_pair_matched: int
    # per ranked prediction: (score, predicate, tp_triplet, tp_phrase)
    records: tuple[tuple[float, int, bool, bool], ...]


def _evaluate_image(pred: SceneGraph, gt: SceneGraph, config: EvalConfig) -> _ImageOutcome:
    filtered = apply_mode(pred, config)
    ranked = ranked_triplets(filtered)
    gt_triplets = resolve_triplets(gt)
    t = config.iou_threshold

    triplet_match = match_triplets(ranked, gt_triplets, "triplet", t)
    phrase_match = match_triplets(ranked, gt_triplets, "phrase", t)
    pair_match = match_triplets(ranked, gt_triplets, "pair", t)
    phrase_pair_match = match_triplets(ranked, gt_triplets, "phrase_pair", t)

    tp_triplet = {p for p, _ in triplet_match.matched_pairs}
    tp_phrase = {p for p, _ in phrase_match.matched_pairs}
    records = tuple(
        (trip.score, trip.predicate, i in tp_triplet, i in tp_phrase)
        for i, trip in enumerate(ranked)
    )
    return _ImageOutcome(
        image_id=gt.image_id,
        gt_count=len(gt.relations),
        matched_at_50=triplet_match.matched_at(RECALL_K),
        pair_matched=len(pair_match.matched_pairs),
        phrase_pair_matched=len(phrase_pair_match.matched_pairs),
        records=records,
    )


def _predicate_aps(outcomes: list[_ImageOutcome], gt_counts: Counter,
                   phrase: bool) -> dict[int, float]:
    pooled: dict[int, list[tuple[float, str, int, bool]]] = {p: [] for p in gt_counts if gt_counts[p] > 0}
    for outcome in outcomes:
        for rank, (score, predicate, tp_trip, tp_phr) in enumerate(outcome.records):
            if predicate not in pooled:
                continue
            tp = tp_phr if phrase else tp_trip
            pooled[predicate].append((score, outcome.image_id, rank, tp))
    aps = {}
    for predicate, rows in pooled.items():
        rows.sort(key=lambda r: (-r[0], r[1], r[2]))
        aps[predicate] = average_precision(
            [(score, tp) for score, _, _, tp in rows], gt_counts[predicate]
        )
    return aps


def oi_evaluate(preds: DatasetSplit, gts: DatasetSplit, config: EvalConfig,
                threads: int = 1, micro_recall: bool = False) -> OiReport:
    """Full Open-Images-style report for a prediction split.

    Recall@50 is macro-averaged per image by default (``micro_recall`` pools
    matches over the dataset instead).  AP pools every prediction across the
    dataset per predicate, ordered by (score desc, image_id, per-image rank),
    with GT counts taken from the evaluated split.  Proposal recalls are the
    dataset-level fraction of GT relations matched when the predicate is
    ignored.
    """
    check_alignment(preds, gts)
    ordered_ids = sorted(gts.image_ids())
    outcomes = parallel_map(
        lambda image_id: _evaluate_image(preds.get(image_id), gts.get(image_id), config),
        ordered_ids,
        threads=threads,
    )

    gt_counts: Counter = Counter()
    for image_id in ordered_ids:
        for rel in gts.get(image_id).relations:
            gt_counts[rel.predicate] += 1

    with_gt = [o for o in outcomes if o.gt_count > 0]
    if not with_gt:
        raise MetricUndefinedError("no image has ground-truth relations")
    total_gt = sum(o.gt_count for o in with_gt)
    if micro_recall:
        recall50 = 100.0 * sum(o.matched_at_50 for o in with_gt) / total_gt
    else:
        recall50 = 100.0 * sum(o.matched_at_50 / o.gt_count for o in with_gt) / len(with_gt)

    triplet_aps = _predicate_aps(outcomes, gt_counts, phrase=False)
    phrase_aps = _predicate_aps(outcomes, gt_counts, phrase=True)
    wmap_triplet = wmap(triplet_aps, gt_counts)
    wmap_phrase = wmap(phrase_aps, gt_counts)

    pair_recall = 100.0 * sum(o.pair_matched for o in with_gt) / total_gt
    phrase_pair_recall = 100.0 * sum(o.phrase_pair_matched for o in with_gt) / total_gt

    return OiReport(
        score=composite_score(recall50, wmap_triplet, wmap_phrase),
        recall_at_50=recall50,
        wmap_triplet=wmap_triplet,
        map_triplet=_mean_ap(triplet_aps, gt_counts),
        wmap_phrase=wmap_phrase,
        map_phrase=_mean_ap(phrase_aps, gt_counts),
        triplet_proposal_recall=pair_recall,
        phrase_proposal_recall=phrase_pair_recall,
    )
