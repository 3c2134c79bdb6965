"""Per-relation precision/recall/F1 over predicted vs ground-truth graphs.

A predicted triplet counts as a true positive when an unconsumed ground-truth
triplet exists with the same predicate whose subject and object boxes both
overlap the prediction's boxes with IoU >= iou_thresh in the reference view.
Predictions are filtered by presence score (min of subject/object scores) and
relation score, then matched greedily in descending relation-score order,
ties broken by lower query index; each ground-truth triplet is consumed once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import SceneGraph
from .taxonomy import PREDICATES, RelationTaxonomy


@dataclass(frozen=True)
class PredictedTriplet:
    """One thresholdable relation prediction with reference-view boxes."""

    predicate: str
    subject_box: tuple[float, float, float, float]
    object_box: tuple[float, float, float, float]
    score: float
    subject_score: float = 1.0
    object_score: float = 1.0
    query_index: int = 0


@dataclass
class ClassStats:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if (p + r) else 0.0


@dataclass
class EvalReport:
    per_class: dict[str, ClassStats]
    frame_count: int = 0
    predicates: tuple[str, ...] = PREDICATES

    @property
    def macro_precision(self) -> float:
        return macro_average([self.per_class[p].precision for p in self.predicates])

    @property
    def macro_recall(self) -> float:
        return macro_average([self.per_class[p].recall for p in self.predicates])

    @property
    def macro_f1(self) -> float:
        return macro_average([self.per_class[p].f1 for p in self.predicates])

    def to_dict(self) -> dict:
        return {
            "frame_count": self.frame_count,
            "per_class": {
                p: {
                    "precision": round(self.per_class[p].precision, 4),
                    "recall": round(self.per_class[p].recall, 4),
                    "f1": round(self.per_class[p].f1, 4),
                    "tp": self.per_class[p].tp,
                    "fp": self.per_class[p].fp,
                    "fn": self.per_class[p].fn,
                }
                for p in self.predicates
            },
            "macro": {
                "precision": round(self.macro_precision, 4),
                "recall": round(self.macro_recall, 4),
                "f1": round(self.macro_f1, 4),
            },
        }


def macro_average(values) -> float:
    """Unweighted arithmetic mean over per-class values."""
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def box_iou(box_a, box_b) -> float:
    ax1, ay1, ax2, ay2 = box_a
    bx1, by1, bx2, by2 = box_b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def _filter_and_sort(predictions, score_thresh: float) -> list[PredictedTriplet]:
    kept = [
        p
        for p in predictions
        if min(p.subject_score, p.object_score) >= score_thresh and p.score >= score_thresh
    ]
    kept.sort(key=lambda p: (-p.score, p.query_index))
    return kept


def _compatible(pred: PredictedTriplet, gt_sub_box, gt_obj_box, iou_thresh: float) -> float | None:
    """Min of the two IoUs when both clear the threshold, else None."""
    iou_s = box_iou(pred.subject_box, gt_sub_box)
    iou_o = box_iou(pred.object_box, gt_obj_box)
    if iou_s >= iou_thresh and iou_o >= iou_thresh:
        return min(iou_s, iou_o)
    return None


def _gt_triplet_boxes(gt_graph: SceneGraph, reference_view: str):
    boxes = {ent.id: ent.boxes[reference_view] for ent in gt_graph.entities}
    return [
        (predicate, boxes[sid], boxes[oid]) for sid, predicate, oid in gt_graph.triplets
    ]


def match_triplets(
    predictions,
    gt_graph: SceneGraph,
    iou_thresh: float = 0.5,
    score_thresh: float = 0.5,
    reference_view: str = "view1",
) -> dict[str, ClassStats]:
    """Per-predicate (tp, fp, fn) counts for a single frame."""
    for name, value in (("iou_thresh", iou_thresh), ("score_thresh", score_thresh)):
        if not 0.0 < value <= 1.0:
            raise ValueError(f"{name} must be in (0, 1], got {value}")

    gt = _gt_triplet_boxes(gt_graph, reference_view)
    consumed = [False] * len(gt)
    counts: dict[str, ClassStats] = {}

    def stats(predicate: str) -> ClassStats:
        return counts.setdefault(predicate, ClassStats())

    for pred in _filter_and_sort(predictions, score_thresh):
        best_iou, best_j = -1.0, -1
        for j, (predicate, sub_box, obj_box) in enumerate(gt):
            if consumed[j] or predicate != pred.predicate:
                continue
            overlap = _compatible(pred, sub_box, obj_box, iou_thresh)
            if overlap is not None and overlap > best_iou:
                best_iou, best_j = overlap, j
        if best_j >= 0:
            consumed[best_j] = True
            stats(pred.predicate).tp += 1
        else:
            stats(pred.predicate).fp += 1

    for j, (predicate, _, _) in enumerate(gt):
        if not consumed[j]:
            stats(predicate).fn += 1
    return counts


def evaluate(
    pred_stream,
    gt_stream,
    relations: RelationTaxonomy | None = None,
    iou_thresh: float = 0.5,
    score_thresh: float = 0.5,
    reference_view: str = "view1",
) -> EvalReport:
    """Accumulate triplet matching over aligned (frame_index, payload) streams.

    pred_stream yields (frame_index, list[PredictedTriplet]); gt_stream yields
    (frame_index, SceneGraph). Frame indices must align pairwise.
    """
    relations = relations or RelationTaxonomy()
    per_class = {p: ClassStats() for p in relations}
    frames = 0
    for (pred_idx, predictions), (gt_idx, gt_graph) in zip(pred_stream, gt_stream, strict=True):
        if pred_idx != gt_idx:
            raise ValueError(f"frame misalignment: predictions at {pred_idx}, ground truth at {gt_idx}")
        frame_counts = match_triplets(
            predictions, gt_graph, iou_thresh=iou_thresh,
            score_thresh=score_thresh, reference_view=reference_view,
        )
        for predicate, stats in frame_counts.items():
            agg = per_class[predicate]
            agg.tp += stats.tp
            agg.fp += stats.fp
            agg.fn += stats.fn
        frames += 1
    return EvalReport(per_class=per_class, frame_count=frames, predicates=tuple(relations))


def max_matching_tp(predictions, gt_graph: SceneGraph, iou_thresh: float = 0.5,
                    score_thresh: float = 0.5, reference_view: str = "view1") -> int:
    """Reference matcher: maximum bipartite TP count over all one-to-one
    prediction-to-gt assignments. Exponential; for small instances only."""
    gt = _gt_triplet_boxes(gt_graph, reference_view)
    preds = _filter_and_sort(predictions, score_thresh)
    compat = [
        [
            j
            for j, (predicate, sub_box, obj_box) in enumerate(gt)
            if predicate == p.predicate and _compatible(p, sub_box, obj_box, iou_thresh) is not None
        ]
        for p in preds
    ]

    def best(i: int, used: frozenset) -> int:
        if i == len(compat):
            return 0
        skip = best(i + 1, used)
        take = 0
        for j in compat[i]:
            if j not in used:
                take = max(take, 1 + best(i + 1, used | {j}))
        return max(skip, take)

    return best(0, frozenset())
