"""Independent reference implementations used only to cross-check the library.

These deliberately share no code with the package: interval arithmetic for
IoU, an eligibility-table greedy matcher, a brute-force optimal assignment,
and a direct PR-polyline AP integral.
"""

from __future__ import annotations


def _overlap_1d(a_lo, a_hi, b_lo, b_hi):
    return max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))


def ref_iou(a, b) -> float:
    inter = _overlap_1d(a.x1, a.x2, b.x1, b.x2) * _overlap_1d(a.y1, a.y2, b.y1, b.y2)
    area_a = (a.x2 - a.x1) * (a.y2 - a.y1)
    area_b = (b.x2 - b.x1) * (b.y2 - b.y1)
    denominator = area_a + area_b - inter
    if denominator <= 0.0:
        return 0.0
    return inter / denominator


def ref_phrase_iou(pred, gt) -> float:
    class _Box:
        def __init__(self, x1, y1, x2, y2):
            self.x1, self.y1, self.x2, self.y2 = x1, y1, x2, y2

    a = _Box(min(pred.subject_box.x1, pred.object_box.x1),
             min(pred.subject_box.y1, pred.object_box.y1),
             max(pred.subject_box.x2, pred.object_box.x2),
             max(pred.subject_box.y2, pred.object_box.y2))
    b = _Box(min(gt.subject_box.x1, gt.object_box.x1),
             min(gt.subject_box.y1, gt.object_box.y1),
             max(gt.subject_box.x2, gt.object_box.x2),
             max(gt.subject_box.y2, gt.object_box.y2))
    return ref_iou(a, b)


def ref_eligibility(pred, gt, criterion, threshold, use_indices):
    """Quality of a (prediction, GT) pairing, or None when ineligible."""
    if pred.subject_label != gt.subject_label:
        return None
    if pred.object_label != gt.object_label:
        return None
    if criterion in ("triplet", "phrase") and pred.predicate != gt.predicate:
        return None
    if use_indices:
        if (pred.subject_idx, pred.object_idx) != (gt.subject_idx, gt.object_idx):
            return None
        return 1.0
    if criterion in ("phrase", "phrase_pair"):
        quality = ref_phrase_iou(pred, gt)
    else:
        sub = ref_iou(pred.subject_box, gt.subject_box)
        obj = ref_iou(pred.object_box, gt.object_box)
        if sub < threshold or obj < threshold:
            return None
        quality = sub if sub < obj else obj
    if quality < threshold:
        return None
    return quality


def ref_greedy_match(preds, gts, criterion, threshold, use_indices):
    """Greedy matcher built from a full eligibility table.

    Returns (matched_pairs, unmatched_gt) with the same tie rules as the
    library: best quality wins, then the lowest GT index.
    """
    table = [
        [ref_eligibility(p, g, criterion, threshold, use_indices) for g in gts]
        for p in preds
    ]
    available = set(range(len(gts)))
    matched = []
    for pi in range(len(preds)):
        candidates = [(gi, table[pi][gi]) for gi in sorted(available)
                      if table[pi][gi] is not None]
        if not candidates:
            continue
        chosen = candidates[0]
        for gi, quality in candidates[1:]:
            if quality > chosen[1]:
                chosen = (gi, quality)
        matched.append((pi, chosen[0]))
        available.discard(chosen[0])
    return tuple(matched), tuple(sorted(available))


def ref_optimal_match_count(preds, gts, criterion, threshold, use_indices) -> int:
    """Maximum bipartite matching size by exhaustive search."""
    eligible = [
        [gi for gi, g in enumerate(gts)
         if ref_eligibility(p, g, criterion, threshold, use_indices) is not None]
        for p in preds
    ]

    def best_from(pi: int, used: frozenset) -> int:
        if pi == len(eligible):
            return 0
        top = best_from(pi + 1, used)
        for gi in eligible[pi]:
            if gi not in used:
                top = max(top, 1 + best_from(pi + 1, used | {gi}))
        return top

    return best_from(0, frozenset())


def ref_average_precision(outcomes, num_gt: int) -> float:
    """AP as the direct PR-polyline area: for every true positive, the best
    precision at or after its rank, summed and divided by the GT count."""
    if num_gt == 0:
        return 0.0
    precisions = []
    hits = 0
    hit_positions = []
    for position, (_, is_tp) in enumerate(outcomes):
        if is_tp:
            hits += 1
            hit_positions.append(position)
        precisions.append(hits / (position + 1))
    area = 0.0
    for position in hit_positions:
        area += max(precisions[position:])
    return area / num_gt
