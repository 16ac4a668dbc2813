"""File formats: scene-graph TSV, vocabulary files, and metric reports.

Scene graphs travel as one image per line, `image_id<TAB>payload`, where the
payload is a JSON object:

    {"objects":   [{"box": [x1, y1, x2, y2], "label": str, "score": float}],
     "relations": [{"sub": int, "obj": int, "pred": str, "score": float}]}

Ground truth and predictions share the schema; ground truth is the special
case where every score is 1.0.  Unknown payload keys are ignored so the
format can grow without breaking old readers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .core import BoundingBox, DetectedObject, RelationPrediction, SceneGraph, Vocabulary
from .errors import ConfigError, DuplicationError, ParseError, VocabularyError

VOCAB_SEPARATOR = "--"
REPORT_FORMATS = ("tsv", "json")


@dataclass(frozen=True)
class DatasetSplit:
    """An ordered set of per-image scene graphs with unique image ids.

    Iteration order is the source file order; that order anchors every
    deterministic aggregation downstream.
    """

    name: str
    graphs: tuple[SceneGraph, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        by_id = {}
        for graph in self.graphs:
            if graph.image_id in by_id:
                raise DuplicationError(f"duplicate image_id {graph.image_id!r} in split {self.name!r}")
            by_id[graph.image_id] = graph
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self) -> Iterator[SceneGraph]:
        return iter(self.graphs)

    def image_ids(self) -> tuple[str, ...]:
        return tuple(g.image_id for g in self.graphs)

    def get(self, image_id: str) -> SceneGraph:
        return self._by_id[image_id]


def _parse_box(raw) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ValueError(f"box must be a 4-element array, got {raw!r}")
    coords = []
    for value in raw:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"box coordinate must be a number, got {value!r}")
        coords.append(float(value))
    return BoundingBox(*coords)


def _parse_score(raw) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ValueError(f"score must be a number, got {raw!r}")
    return float(raw)


def _parse_graph(image_id: str, payload: str, vocabulary: Vocabulary) -> SceneGraph:
    data = json.loads(payload)
    if not isinstance(data, dict):
        raise ValueError("payload must be a JSON object")
    raw_objects = data.get("objects")
    raw_relations = data.get("relations")
    if not isinstance(raw_objects, list) or not isinstance(raw_relations, list):
        raise ValueError('payload needs "objects" and "relations" arrays')

    objects = []
    for entry in raw_objects:
        if not isinstance(entry, dict):
            raise ValueError(f"object entry must be an object, got {entry!r}")
        label = entry.get("label")
        if not isinstance(label, str):
            raise ValueError(f"object label must be a string, got {label!r}")
        objects.append(DetectedObject(
            box=_parse_box(entry.get("box")),
            label=vocabulary.object_index(label),
            score=_parse_score(entry.get("score", 1.0)),
        ))

    relations = []
    for entry in raw_relations:
        if not isinstance(entry, dict):
            raise ValueError(f"relation entry must be an object, got {entry!r}")
        pred = entry.get("pred")
        if not isinstance(pred, str):
            raise ValueError(f"relation predicate must be a string, got {pred!r}")
        sub, obj = entry.get("sub"), entry.get("obj")
        if isinstance(sub, bool) or isinstance(obj, bool) or not isinstance(sub, int) or not isinstance(obj, int):
            raise ValueError(f'relation "sub"/"obj" must be integers, got {sub!r}/{obj!r}')
        relations.append(RelationPrediction(
            subject_idx=sub,
            object_idx=obj,
            predicate=vocabulary.predicate_index(pred),
            score=_parse_score(entry.get("score", 1.0)),
        ))

    return SceneGraph(image_id=image_id, objects=tuple(objects), relations=tuple(relations))


def read_scene_graphs(path: str | os.PathLike, vocabulary: Vocabulary,
                      name: str | None = None) -> DatasetSplit:
    """Parse a scene-graph TSV into a split, preserving file order.

    Raises :class:`ParseError` (with line number) for malformed lines,
    :class:`VocabularyError` for unknown labels, and
    :class:`DuplicationError` for repeated image ids.
    """
    if name is None:
        name = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    with open(path, "rb") as handle:
        raw = handle.read()

    graphs: list[SceneGraph] = []
    seen: set[str] = set()
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    for lineno, raw_line in enumerate(lines, start=1):
        if raw_line.endswith(b"\r"):
            raw_line = raw_line[:-1]
        try:
            line = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(lineno, f"invalid UTF-8: {exc}") from None
        image_id, sep, payload = line.partition("\t")
        if not sep or not image_id:
            raise ParseError(lineno, "expected image_id<TAB>payload")
        if image_id in seen:
            raise DuplicationError(f"line {lineno}: duplicate image_id {image_id!r}")
        try:
            graphs.append(_parse_graph(image_id, payload, vocabulary))
        except VocabularyError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ParseError(lineno, str(exc)) from None
        seen.add(image_id)
    return DatasetSplit(name=name, graphs=tuple(graphs))


def scene_graph_line(graph: SceneGraph, vocabulary: Vocabulary) -> str:
    """One TSV line for a graph; floats keep full round-trip precision."""
    payload = {
        "objects": [
            {"box": [o.box.x1, o.box.y1, o.box.x2, o.box.y2],
             "label": vocabulary.object_labels[o.label],
             "score": o.score}
            for o in graph.objects
        ],
        "relations": [
            {"sub": r.subject_idx, "obj": r.object_idx,
             "pred": vocabulary.predicate_labels[r.predicate],
             "score": r.score}
            for r in graph.relations
        ],
    }
    return graph.image_id + "\t" + json.dumps(payload, separators=(",", ":"))


def write_scene_graphs(split: DatasetSplit, path: str | os.PathLike,
                       vocabulary: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for graph in split:
            handle.write(scene_graph_line(graph, vocabulary) + "\n")


def read_vocabulary(path: str | os.PathLike) -> Vocabulary:
    """Read a two-section label file: object labels, `--`, predicate labels."""
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        lines = raw.decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(raw.count(b"\n", 0, exc.start) + 1, f"invalid UTF-8: {exc}") from None
    sections: list[list[str]] = [[]]
    for lineno, line in enumerate(lines, start=1):
        if line == VOCAB_SEPARATOR:
            if len(sections) == 2:
                raise ParseError(lineno, "more than one section separator")
            sections.append([])
        elif line:
            sections[-1].append(line)
    objects = sections[0]
    predicates = sections[1] if len(sections) == 2 else []
    try:
        return Vocabulary(object_labels=tuple(objects), predicate_labels=tuple(predicates))
    except ValueError as exc:
        raise DuplicationError(str(exc)) from None


def write_vocabulary(vocabulary: Vocabulary, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for label in vocabulary.object_labels:
            handle.write(label + "\n")
        handle.write(VOCAB_SEPARATOR + "\n")
        for label in vocabulary.predicate_labels:
            handle.write(label + "\n")


def format_report(report: Mapping[str, float], fmt: str = "tsv") -> str:
    """Render a metric table bit-stably: sorted keys, fixed 4-decimal values."""
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"report format must be one of {REPORT_FORMATS}, got {fmt!r}")
    for key, value in report.items():
        if not math.isfinite(value):
            raise ValueError(f"report value for {key!r} is not finite: {value!r}")
    keys = sorted(report)
    if fmt == "tsv":
        lines = ["metric\tvalue"]
        lines += [f"{key}\t{report[key]:.4f}" for key in keys]
        return "\n".join(lines) + "\n"
    if not keys:
        return "{}\n"
    body = ",\n".join(f"  {json.dumps(key)}: {report[key]:.4f}" for key in keys)
    return "{\n" + body + "\n}\n"


def write_report(report: Mapping[str, float], path: str | os.PathLike, fmt: str = "tsv") -> None:
    text = format_report(report, fmt)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def file_checksum(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def split_from_graphs(name: str, graphs: Iterable[SceneGraph]) -> DatasetSplit:
    return DatasetSplit(name=name, graphs=tuple(graphs))
