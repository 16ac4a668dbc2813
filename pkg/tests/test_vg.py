import random

import pytest

from sgeval.core import (BoundingBox, DetectedObject, EvalConfig, RelationPrediction,
                         SceneGraph)
from sgeval.errors import AlignmentError, MetricUndefinedError, TaskContractError
from sgeval.ingest import DatasetSplit
from sgeval.synth import SynthConfig, DetectionNoise, RelationNoise, degradation_chain
from sgeval.vg import vg_recall

from util import random_eval_pair, random_gt_graph

CONFIG = EvalConfig(task="predcls", mode="constrained", k_values=(20, 50, 100))


def two_relation_scene():
    objects = (
        DetectedObject(BoundingBox(0, 0, 10, 10), label=0),
        DetectedObject(BoundingBox(20, 0, 30, 10), label=1),
        DetectedObject(BoundingBox(40, 0, 50, 10), label=2),
    )
    gt = SceneGraph("img", objects, (
        RelationPrediction(0, 1, 0, 1.0),
        RelationPrediction(1, 2, 1, 1.0),
    ))
    return objects, gt


class TestVgRecall:
    def test_perfect_predictions_hit_100(self):
        _, gt = two_relation_scene()
        split = DatasetSplit("s", (gt,))
        for task in ("predcls", "sgcls", "sgdet"):
            report = vg_recall(split, split, EvalConfig(task=task))
            assert all(v == 100.0 for _, v in report.recalls)

    def test_empty_predictions_zero(self):
        objects, gt = two_relation_scene()
        preds = DatasetSplit("p", (SceneGraph("img", objects, ()),))
        report = vg_recall(preds, DatasetSplit("g", (gt,)), CONFIG)
        assert all(v == 0.0 for _, v in report.recalls)

    def test_one_of_two_is_50(self):
        objects, gt = two_relation_scene()
        preds = DatasetSplit("p", (SceneGraph("img", objects, (
            RelationPrediction(0, 1, 0, 0.9),       # correct
            RelationPrediction(2, 0, 1, 0.8),       # wrong pair
        )),))
        report = vg_recall(preds, DatasetSplit("g", (gt,)), CONFIG)
        assert all(v == 50.0 for _, v in report.recalls)

    def test_sgdet_iou_threshold_boundary(self):
        # subject box at IoU 100/180 passes the 0.5 threshold, the object box
        # at 100/220 does not, so exactly one of two relations matches
        _, gt = two_relation_scene()
        pred_objects = (
            DetectedObject(BoundingBox(0, 0, 10, 18), label=0),
            DetectedObject(BoundingBox(20, 0, 30, 10), label=1),
            DetectedObject(BoundingBox(40, 0, 50, 22), label=2),
        )
        preds = DatasetSplit("p", (SceneGraph("img", pred_objects, (
            RelationPrediction(0, 1, 0, 0.9),
            RelationPrediction(1, 2, 1, 0.8),
        )),))
        report = vg_recall(preds, DatasetSplit("g", (gt,)),
                           EvalConfig(task="sgdet", k_values=(20,)))
        assert report.value(20) == 50.0
        loose = vg_recall(preds, DatasetSplit("g", (gt,)),
                          EvalConfig(task="sgdet", k_values=(20,), iou_threshold=0.4))
        assert loose.value(20) == 100.0

    def test_monotone_in_k(self):
        rnd = random.Random(11)
        for _ in range(30):
            preds, gts = random_eval_pair(rnd)
            report = vg_recall(preds, gts, EvalConfig(task="predcls", k_values=(1, 2, 5, 20)))
            values = [v for _, v in report.recalls]
            assert values == sorted(values)

    def test_relation_below_rank_k_is_invisible(self):
        objects, gt = two_relation_scene()
        base = SceneGraph("img", objects, (
            RelationPrediction(0, 1, 0, 0.9),
            RelationPrediction(1, 2, 0, 0.8),
        ))
        added = SceneGraph("img", objects, base.relations + (
            RelationPrediction(2, 1, 1, 0.1),
        ))
        config = EvalConfig(task="predcls", k_values=(2,))
        before = vg_recall(DatasetSplit("a", (base,)), DatasetSplit("g", (gt,)), config)
        after = vg_recall(DatasetSplit("b", (added,)), DatasetSplit("g", (gt,)), config)
        assert before == after

    def test_duplicated_content_carries_identical_recall(self):
        # A duplicate (same content, new id) contributes exactly its original's
        # per-image recall, so duplicating every image leaves the macro mean
        # unchanged, as does duplicating the sole image of a split.
        rnd = random.Random(3)
        preds, gts = random_eval_pair(rnd, num_images=3)
        clone = lambda g: SceneGraph("copy_" + g.image_id, g.objects, g.relations)
        doubled_preds = DatasetSplit("p", preds.graphs + tuple(clone(g) for g in preds.graphs))
        doubled_gts = DatasetSplit("g", gts.graphs + tuple(clone(g) for g in gts.graphs))
        doubled = vg_recall(doubled_preds, doubled_gts, CONFIG)
        base = vg_recall(preds, gts, CONFIG)
        for (_, got), (_, want) in zip(doubled.recalls, base.recalls):
            assert got == pytest.approx(want, abs=1e-9)
        single_p = DatasetSplit("p1", (preds.graphs[0],))
        single_g = DatasetSplit("g1", (gts.graphs[0],))
        dup_p = DatasetSplit("p2", (preds.graphs[0], clone(preds.graphs[0])))
        dup_g = DatasetSplit("g2", (gts.graphs[0], clone(gts.graphs[0])))
        assert vg_recall(dup_p, dup_g, CONFIG).recalls == \
            vg_recall(single_p, single_g, CONFIG).recalls

    def test_alignment_error(self):
        _, gt = two_relation_scene()
        other = random_gt_graph(random.Random(0), "other")
        with pytest.raises(AlignmentError):
            vg_recall(DatasetSplit("p", (gt,)), DatasetSplit("g", (other,)), CONFIG)

    def test_predcls_box_contract(self):
        objects, gt = two_relation_scene()
        moved = (DetectedObject(BoundingBox(1, 1, 11, 11), label=0),) + objects[1:]
        preds = DatasetSplit("p", (SceneGraph("img", moved, ()),))
        with pytest.raises(TaskContractError):
            vg_recall(preds, DatasetSplit("g", (gt,)), CONFIG)

    def test_predcls_label_contract(self):
        objects, gt = two_relation_scene()
        relabeled = (DetectedObject(objects[0].box, label=5),) + objects[1:]
        preds = DatasetSplit("p", (SceneGraph("img", relabeled, ()),))
        with pytest.raises(TaskContractError):
            vg_recall(preds, DatasetSplit("g", (gt,)), CONFIG)
        # sgcls only constrains boxes, so the same input is fine there.
        report = vg_recall(preds, DatasetSplit("g", (gt,)),
                           EvalConfig(task="sgcls", k_values=(20,)))
        assert report.value(20) == 0.0

    def test_no_gt_relations_undefined(self):
        objects, _ = two_relation_scene()
        empty = SceneGraph("img", objects, ())
        split = DatasetSplit("s", (empty,))
        with pytest.raises(MetricUndefinedError):
            vg_recall(split, split, CONFIG)


class TestDegradationOrdering:
    def test_predcls_dominates_sgcls_dominates_sgdet(self):
        for seed in range(8):
            config = SynthConfig(
                seed=seed, num_images=6, min_objects=3, max_objects=6,
                detection_noise=DetectionNoise(box_jitter=0.35, label_flip_rate=0.3),
                relation_noise=RelationNoise(predicate_flip_rate=0.2),
            )
            chain = degradation_chain(config)
            ks = (20, 50, 100)
            predcls = vg_recall(chain.predcls, chain.gt, EvalConfig(task="predcls", k_values=ks))
            sgcls = vg_recall(chain.sgcls, chain.gt, EvalConfig(task="sgcls", k_values=ks))
            sgdet = vg_recall(chain.sgdet, chain.gt, EvalConfig(task="sgdet", k_values=ks))
            for k in ks:
                assert predcls.value(k) >= sgcls.value(k) >= sgdet.value(k)
