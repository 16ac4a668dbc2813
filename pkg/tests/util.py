"""Shared builders for randomized test scenes.

Scores are drawn from a coarse dyadic grid so that ties actually occur and
multiplying by powers of two stays exact.
"""

from __future__ import annotations

import math
import random

from sgeval.core import BoundingBox, DetectedObject, RelationPrediction, SceneGraph
from sgeval.ingest import DatasetSplit
from sgeval.matching import Triplet

SCORE_GRID = [i / 64.0 for i in range(1, 65)]


def random_box(rnd: random.Random, span: float = 100.0) -> BoundingBox:
    xs = sorted(rnd.uniform(0.0, span) for _ in range(2))
    ys = sorted(rnd.uniform(0.0, span) for _ in range(2))
    return BoundingBox(xs[0], ys[0], xs[1], ys[1])


def random_triplet(rnd: random.Random, num_labels: int = 3, num_predicates: int = 3,
                   max_index: int = 6) -> Triplet:
    sub_idx = rnd.randrange(max_index)
    obj_idx = (sub_idx + 1 + rnd.randrange(max_index - 1)) % max_index
    return Triplet(
        subject_box=random_box(rnd),
        subject_label=rnd.randrange(num_labels),
        predicate=rnd.randrange(num_predicates),
        object_box=random_box(rnd),
        object_label=rnd.randrange(num_labels),
        score=rnd.choice(SCORE_GRID),
        subject_idx=sub_idx,
        object_idx=obj_idx,
    )


def ranked(triplets) -> list:
    return sorted(triplets, key=lambda t: (-t.score, t.subject_idx, t.object_idx, t.predicate))


def grid_objects(rnd: random.Random, n: int, num_labels: int, span: float = 1000.0,
                 scored: bool = False) -> tuple[DetectedObject, ...]:
    """Objects in disjoint grid cells, so every box identity is unambiguous."""
    grid = math.ceil(math.sqrt(n))
    cell = span / grid
    objects = []
    for i in range(n):
        col, row = i % grid, i // grid
        bw = cell * (0.3 + 0.2 * rnd.random())
        bh = cell * (0.3 + 0.2 * rnd.random())
        x1 = col * cell + 0.25 * cell + rnd.random() * (0.5 * cell - bw)
        y1 = row * cell + 0.25 * cell + rnd.random() * (0.5 * cell - bh)
        score = rnd.choice(SCORE_GRID) if scored else 1.0
        objects.append(DetectedObject(
            box=BoundingBox(x1, y1, x1 + bw, y1 + bh),
            label=rnd.randrange(num_labels),
            score=score,
        ))
    return tuple(objects)


def random_gt_graph(rnd: random.Random, image_id: str, num_labels: int = 8,
                    num_predicates: int = 5, max_objects: int = 6) -> SceneGraph:
    n = rnd.randint(2, max_objects)
    objects = grid_objects(rnd, n, num_labels)
    relations = []
    used = set()
    for _ in range(rnd.randint(1, 2 * (n - 1))):
        i = rnd.randrange(n)
        j = (i + 1 + rnd.randrange(n - 1)) % n
        if (i, j) in used:
            continue
        used.add((i, j))
        relations.append(RelationPrediction(i, j, rnd.randrange(num_predicates), 1.0))
    if not relations:
        relations.append(RelationPrediction(0, 1, rnd.randrange(num_predicates), 1.0))
    return SceneGraph(image_id, objects, tuple(relations))


def noisy_predictions(rnd: random.Random, gt: SceneGraph, num_predicates: int = 5,
                      keep_prob: float = 0.7, extra: int = 3) -> SceneGraph:
    """Prediction graph on the GT objects: some GT relations kept (scored),
    plus scored noise relations on other pairs."""
    n = len(gt.objects)
    relations = []
    used = set()
    for rel in gt.relations:
        if rnd.random() < keep_prob:
            relations.append(RelationPrediction(rel.subject_idx, rel.object_idx,
                                                rel.predicate, rnd.choice(SCORE_GRID)))
            used.add((rel.subject_idx, rel.object_idx, rel.predicate))
    for _ in range(extra):
        i = rnd.randrange(n)
        j = (i + 1 + rnd.randrange(n - 1)) % n
        predicate = rnd.randrange(num_predicates)
        if (i, j, predicate) in used:
            continue
        used.add((i, j, predicate))
        relations.append(RelationPrediction(i, j, predicate, rnd.choice(SCORE_GRID)))
    return SceneGraph(gt.image_id, gt.objects, tuple(relations))


def random_eval_pair(rnd: random.Random, num_images: int = 3, num_labels: int = 8,
                     num_predicates: int = 5) -> tuple[DatasetSplit, DatasetSplit]:
    """(predictions, ground truth) over the same images, predcls-compatible."""
    gt_graphs = []
    pred_graphs = []
    for i in range(num_images):
        gt = random_gt_graph(rnd, f"case_{i:04d}", num_labels, num_predicates)
        gt_graphs.append(gt)
        pred_graphs.append(noisy_predictions(rnd, gt, num_predicates))
    return (DatasetSplit("preds", tuple(pred_graphs)),
            DatasetSplit("gt", tuple(gt_graphs)))


def scale_scores(split: DatasetSplit, factor: float) -> DatasetSplit:
    graphs = []
    for graph in split:
        relations = tuple(
            RelationPrediction(r.subject_idx, r.object_idx, r.predicate, r.score * factor)
            for r in graph.relations
        )
        graphs.append(SceneGraph(graph.image_id, graph.objects, relations))
    return DatasetSplit(split.name, tuple(graphs))
