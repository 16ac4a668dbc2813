import random

import pytest

from sgeval.compare import (ComparisonMatrix, ensemble_accuracy, ensemble_matrix,
                            format_matrix, pairwise_similarity, similarity_matrix)
from sgeval.core import (BoundingBox, DetectedObject, RelationPrediction, SceneGraph)
from sgeval.errors import AlignmentError, TaskContractError
from sgeval.ingest import DatasetSplit

from util import random_gt_graph, noisy_predictions


def objects():
    return (
        DetectedObject(BoundingBox(0, 0, 10, 10), label=0),
        DetectedObject(BoundingBox(20, 0, 30, 10), label=1),
        DetectedObject(BoundingBox(40, 0, 50, 10), label=2),
    )


def model(image_id, triples):
    return SceneGraph(image_id, objects(),
                      tuple(RelationPrediction(s, o, p, 1.0) for s, o, p in triples))


def split(*graphs):
    return DatasetSplit("m", tuple(graphs))


class TestPairwiseSimilarity:
    def test_identical_models_100(self):
        a = split(model("i", [(0, 1, 0), (1, 2, 1)]))
        assert pairwise_similarity(a, a) == 100.0

    def test_disjoint_models_0(self):
        a = split(model("i", [(0, 1, 0)]))
        b = split(model("i", [(1, 2, 1)]))
        assert pairwise_similarity(a, b) == 0.0

    def test_one_of_three(self):
        a = split(model("i", [(0, 1, 0), (1, 2, 1)]))     # {t1, t2}
        b = split(model("i", [(1, 2, 1), (2, 0, 2)]))     # {t2, t3}
        value = pairwise_similarity(a, b)
        assert round(value, 2) == 33.33
        assert value == pytest.approx(100.0 / 3.0)

    def test_symmetric(self):
        rnd = random.Random(3)
        for _ in range(20):
            gt = random_gt_graph(rnd, "img")
            a = split(noisy_predictions(rnd, gt))
            b = split(noisy_predictions(rnd, gt))
            assert pairwise_similarity(a, b) == pairwise_similarity(b, a)

    def test_alignment_checked(self):
        a = split(model("i", [(0, 1, 0)]))
        b = DatasetSplit("m", (model("other", [(0, 1, 0)]),))
        with pytest.raises(AlignmentError):
            pairwise_similarity(a, b)

    def test_constrained_filter_applied(self):
        # two predicates on one pair: only the top-1 side counts
        a = split(SceneGraph("i", objects(), (
            RelationPrediction(0, 1, 0, 0.9),
            RelationPrediction(0, 1, 1, 0.2),
        )))
        b = split(model("i", [(0, 1, 0)]))
        assert pairwise_similarity(a, b) == 100.0

    def test_jaccard_triangle_sanity(self):
        # 1 - similarity/100 behaves like a distance on random model triples
        rnd = random.Random(7)
        for _ in range(25):
            gt = random_gt_graph(rnd, "img")
            models = [DatasetSplit(n, (noisy_predictions(rnd, gt),)) for n in "abc"]
            d = {}
            for i in range(3):
                for j in range(3):
                    d[(i, j)] = 1.0 - pairwise_similarity(models[i], models[j]) / 100.0
            for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
                assert d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-12

    def test_iou_identity_tolerates_jitter(self):
        base = model("i", [(0, 1, 0)])
        moved_objects = (
            DetectedObject(BoundingBox(1, 0, 11, 10), label=0),
            DetectedObject(BoundingBox(21, 0, 31, 10), label=1),
            DetectedObject(BoundingBox(41, 0, 51, 10), label=2),
        )
        moved = SceneGraph("i", moved_objects, (RelationPrediction(0, 1, 0, 1.0),))
        a, b = split(base), split(moved)
        assert pairwise_similarity(a, b) == 0.0
        assert pairwise_similarity(a, b, iou_identity=True) == 100.0


class TestEnsembleAccuracy:
    def gt(self):
        return split(model("i", [(0, 1, 0), (1, 2, 1)]))

    def test_self_ensemble_is_single_model_accuracy(self):
        a = split(model("i", [(0, 1, 0), (1, 2, 2)]))     # one of two right
        assert ensemble_accuracy(a, a, self.gt()) == 50.0

    def test_complementary_models_cover_everything(self):
        a = split(model("i", [(0, 1, 0), (1, 2, 2)]))     # right on relation 1
        b = split(model("i", [(0, 1, 2), (1, 2, 1)]))     # right on relation 2
        assert ensemble_accuracy(a, b, self.gt()) == 100.0

    def test_always_wrong_is_zero(self):
        a = split(model("i", [(0, 1, 2), (1, 2, 2)]))
        assert ensemble_accuracy(a, a, self.gt()) == 0.0

    def test_union_dominates_diagonal(self):
        rnd = random.Random(11)
        for _ in range(30):
            gt_graph = random_gt_graph(rnd, "img")
            gt = DatasetSplit("g", (gt_graph,))
            a = DatasetSplit("a", (noisy_predictions(rnd, gt_graph),))
            b = DatasetSplit("b", (noisy_predictions(rnd, gt_graph),))
            joint = ensemble_accuracy(a, b, gt)
            assert joint >= max(ensemble_accuracy(a, a, gt), ensemble_accuracy(b, b, gt))

    def test_symmetric(self):
        rnd = random.Random(13)
        gt_graph = random_gt_graph(rnd, "img")
        gt = DatasetSplit("g", (gt_graph,))
        a = DatasetSplit("a", (noisy_predictions(rnd, gt_graph),))
        b = DatasetSplit("b", (noisy_predictions(rnd, gt_graph),))
        assert ensemble_accuracy(a, b, gt) == ensemble_accuracy(b, a, gt)

    def test_requires_predcls_objects(self):
        shifted = (
            DetectedObject(BoundingBox(5, 5, 15, 15), label=0),
            DetectedObject(BoundingBox(20, 0, 30, 10), label=1),
            DetectedObject(BoundingBox(40, 0, 50, 10), label=2),
        )
        bad = split(SceneGraph("i", shifted, (RelationPrediction(0, 1, 0, 1.0),)))
        with pytest.raises(TaskContractError):
            ensemble_accuracy(bad, bad, self.gt())


class TestMatrices:
    def named_models(self, rnd, count=3):
        gt_graph = random_gt_graph(rnd, "img")
        gt = DatasetSplit("g", (gt_graph,))
        named = [(f"m{i}", DatasetSplit(f"m{i}", (noisy_predictions(rnd, gt_graph),)))
                 for i in range(count)]
        return named, gt

    def test_similarity_matrix_diag_and_symmetry(self):
        named, _ = self.named_models(random.Random(17))
        matrix = similarity_matrix(named)
        n = len(matrix.names)
        for i in range(n):
            assert matrix.value(i, i) == 100.0
            for j in range(n):
                assert matrix.value(i, j) == matrix.value(j, i)

    def test_ensemble_matrix_dominates_diagonal(self):
        named, gt = self.named_models(random.Random(19))
        matrix = ensemble_matrix(named, gt)
        n = len(matrix.names)
        for i in range(n):
            for j in range(n):
                assert matrix.value(i, j) == matrix.value(j, i)
                assert matrix.value(i, j) >= max(matrix.value(i, i), matrix.value(j, j)) - 1e-9

    def test_format(self):
        matrix = ComparisonMatrix("similarity", ("a", "b"),
                                  ((100.0, 50.0), (50.0, 100.0)))
        text = format_matrix(matrix)
        assert text.splitlines()[0] == "model\ta\tb"
        assert "50.0000" in text
