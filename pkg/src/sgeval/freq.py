"""Frequency-prior baselines: predicate statistics conditioned on label pairs.

The plain variant counts every training relation; the overlap variant only
counts (and only predicts for) subject/object pairs whose boxes have strictly
positive intersection.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .core import EvalConfig, RelationPrediction, SceneGraph, Vocabulary
from .errors import ConfigError, ParseError
from .ingest import DatasetSplit
from .matching import iou

VARIANTS = ("freq", "freq_overlap")


@dataclass(frozen=True)
class FrequencyPrior:
    """Predicate counts per (subject label, object label) pair."""

    variant: str
    counts: tuple[tuple[tuple[int, int], tuple[tuple[int, int], ...]], ...]
    _table: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        table = {pair: dict(preds) for pair, preds in self.counts}
        object.__setattr__(self, "_table", table)

    @staticmethod
    def from_table(variant: str, table: dict[tuple[int, int], dict[int, int]]) -> "FrequencyPrior":
        frozen = tuple(
            (pair, tuple(sorted(table[pair].items())))
            for pair in sorted(table)
        )
        return FrequencyPrior(variant=variant, counts=frozen)

    def pair_counts(self, subject_label: int, object_label: int) -> dict[int, int]:
        return dict(self._table.get((subject_label, object_label), {}))

    def probabilities(self, subject_label: int, object_label: int) -> list[tuple[int, float]]:
        """Predicate distribution for a label pair, sorted by (prob desc, predicate asc)."""
        counts = self._table.get((subject_label, object_label))
        if not counts:
            return []
        total = sum(counts.values())
        if total <= 0:
            return []
        return sorted(
            ((predicate, count / total) for predicate, count in counts.items()),
            key=lambda item: (-item[1], item[0]),
        )

    def max_count(self) -> int:
        best = 0
        for preds in self._table.values():
            for count in preds.values():
                best = max(best, count)
        return best


def build_prior(train: DatasetSplit, variant: str = "freq") -> FrequencyPrior:
    """Count GT predicates per label pair over a training split.

    The overlap variant skips relations whose subject and object boxes do not
    intersect with positive area.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    table: dict[tuple[int, int], dict[int, int]] = {}
    for graph in train:
        for rel in graph.relations:
            sub = graph.objects[rel.subject_idx]
            obj = graph.objects[rel.object_idx]
            if variant == "freq_overlap" and iou(sub.box, obj.box) <= 0.0:
                continue
            pair = table.setdefault((sub.label, obj.label), {})
            pair[rel.predicate] = pair.get(rel.predicate, 0) + 1
    return FrequencyPrior.from_table(variant, table)


def predict_with_prior(detections: SceneGraph, prior: FrequencyPrior, config: EvalConfig,
                       use_raw_counts: bool = False) -> SceneGraph:
    """Emit prior-ranked relations for every ordered object pair.

    Each pair gets the top ``max_predicates_per_pair`` predicates of its label
    pair (one in constrained mode), scored by the conditional probability.
    Unseen label pairs emit nothing; the overlap variant also skips pairs
    whose boxes do not intersect.  ``use_raw_counts`` rescales scores by raw
    count / global max count so cross-pair ranking follows raw frequency.
    """
    limit = 1 if config.mode == "constrained" else config.max_predicates_per_pair
    global_max = prior.max_count() if use_raw_counts else 0
    relations: list[RelationPrediction] = []
    n = len(detections.objects)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            sub, obj = detections.objects[i], detections.objects[j]
            if prior.variant == "freq_overlap" and iou(sub.box, obj.box) <= 0.0:
                continue
            ranked = prior.probabilities(sub.label, obj.label)
            for predicate, prob in ranked[:limit]:
                if use_raw_counts:
                    count = prior.pair_counts(sub.label, obj.label)[predicate]
                    score = count / global_max
                else:
                    score = prob
                relations.append(RelationPrediction(
                    subject_idx=i, object_idx=j, predicate=predicate, score=score,
                ))
    return SceneGraph(image_id=detections.image_id, objects=detections.objects,
                      relations=tuple(relations))


def write_prior(prior: FrequencyPrior, path: str | os.PathLike, vocabulary: Vocabulary) -> None:
    """Persist as `subject<TAB>object<TAB>predicate<TAB>count`, sorted by labels."""
    rows = []
    for (s, o), preds in prior.counts:
        for predicate, count in preds:
            rows.append((
                vocabulary.object_labels[s],
                vocabulary.object_labels[o],
                vocabulary.predicate_labels[predicate],
                count,
            ))
    rows.sort()
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for sub, obj, pred, count in rows:
            handle.write(f"{sub}\t{obj}\t{pred}\t{count}\n")


def read_prior(path: str | os.PathLike, vocabulary: Vocabulary,
               variant: str = "freq") -> FrequencyPrior:
    table: dict[tuple[int, int], dict[int, int]] = {}
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(raw.count(b"\n", 0, exc.start) + 1, f"invalid UTF-8: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(lineno, f"expected 4 tab-separated fields, got {len(parts)}")
        sub, obj, pred, raw_count = parts
        try:
            count = int(raw_count)
        except ValueError:
            raise ParseError(lineno, f"count must be an integer, got {raw_count!r}") from None
        if count < 0:
            raise ParseError(lineno, f"count must be >= 0, got {count}")
        key = (vocabulary.object_index(sub), vocabulary.object_index(obj))
        table.setdefault(key, {})[vocabulary.predicate_index(pred)] = count
    return FrequencyPrior.from_table(variant, table)


def predict_split(detections: DatasetSplit, prior: FrequencyPrior, config: EvalConfig,
                  use_raw_counts: bool = False) -> DatasetSplit:
    graphs = tuple(
        predict_with_prior(graph, prior, config, use_raw_counts=use_raw_counts)
        for graph in detections
    )
    return DatasetSplit(name=detections.name, graphs=graphs)
