"""Visual-Genome-style Recall@K for the predcls / sgcls / sgdet settings."""

from __future__ import annotations

from dataclasses import dataclass

from .core import EvalConfig, SceneGraph, apply_mode
from .errors import AlignmentError, MetricUndefinedError, TaskContractError
from .ingest import DatasetSplit
from .matching import match_triplets, ranked_triplets, resolve_triplets
from .parallel import parallel_map


@dataclass(frozen=True)
class VgRecallReport:
    """Per-K recall for one task, on a 0-100 scale."""

    task: str
    recalls: tuple[tuple[int, float], ...]

    def value(self, k: int) -> float:
        for key, recall in self.recalls:
            if key == k:
                return recall
        raise KeyError(k)

    def as_table(self) -> dict[str, float]:
        return {f"{self.task}@{k}": v for k, v in self.recalls}


def check_alignment(preds: DatasetSplit, gts: DatasetSplit) -> None:
    pred_ids = set(preds.image_ids())
    gt_ids = set(gts.image_ids())
    if pred_ids != gt_ids:
        missing = sorted(gt_ids - pred_ids)[:5]
        extra = sorted(pred_ids - gt_ids)[:5]
        raise AlignmentError(
            f"splits cover different images (missing from predictions: {missing}, "
            f"unexpected: {extra})"
        )


def check_task_contract(pred: SceneGraph, gt: SceneGraph, task: str) -> None:
    """predcls/sgcls inputs must carry exactly the ground-truth object list."""
    if task == "sgdet":
        return
    if len(pred.objects) != len(gt.objects):
        raise TaskContractError(
            f"image {gt.image_id}: {task} input has {len(pred.objects)} objects, "
            f"ground truth has {len(gt.objects)}"
        )
    for i, (p, g) in enumerate(zip(pred.objects, gt.objects)):
        if p.box != g.box:
            raise TaskContractError(
                f"image {gt.image_id}: {task} input box {i} differs from ground truth"
            )
        if task == "predcls" and p.label != g.label:
            raise TaskContractError(
                f"image {gt.image_id}: predcls input label {i} differs from ground truth"
            )


def _image_recalls(pred: SceneGraph, gt: SceneGraph, config: EvalConfig) -> list[float] | None:
    if not gt.relations:
        return None
    check_task_contract(pred, gt, config.task)
    filtered = apply_mode(pred, config)
    ranked = ranked_triplets(filtered)
    gt_triplets = resolve_triplets(gt)
    result = match_triplets(
        ranked,
        gt_triplets,
        criterion="triplet",
        iou_threshold=config.iou_threshold,
        use_indices=config.task != "sgdet",
    )
    total = len(gt.relations)
    return [result.matched_at(k) / total for k in config.k_values]


def vg_recall(preds: DatasetSplit, gts: DatasetSplit, config: EvalConfig,
              threads: int = 1) -> VgRecallReport:
    """Macro-averaged Recall@K over images with at least one GT relation.

    Per image: filter to the configured predicate budget, rank by triplet
    score, truncate to the top K, and greedily match against ground truth
    (object-index matching for predcls/sgcls, IoU matching for sgdet).
    """
    check_alignment(preds, gts)
    ordered_ids = sorted(gts.image_ids())
    per_image = parallel_map(
        lambda image_id: _image_recalls(preds.get(image_id), gts.get(image_id), config),
        ordered_ids,
        threads=threads,
    )
    scored = [r for r in per_image if r is not None]
    if not scored:
        raise MetricUndefinedError("no image has ground-truth relations; recall is undefined")
    n = len(scored)
    means = [100.0 * sum(r[i] for r in scored) / n for i in range(len(config.k_values))]
    return VgRecallReport(
        task=config.task,
        recalls=tuple(zip(config.k_values, means)),
    )
