import numpy as np
import pytest

from tritemp_or.graph import Entity, build_graph
from tritemp_or.metrics import (
    EvalReport,
    ClassStats,
    PredictedTriplet,
    evaluate,
    macro_average,
    match_triplets,
    max_matching_tp,
)
from tritemp_or.taxonomy import PREDICATES, RelationTaxonomy

# Published per-class F1 values for the tri-modal model (14 relation classes).
REFERENCE_F1 = [0.76, 0.97, 0.89, 0.95, 0.85, 0.96, 0.95, 0.83, 1.00, 0.92, 0.87, 0.97, 0.95, 0.77]

B0 = (0.1, 0.1, 0.3, 0.3)
B1 = (0.5, 0.5, 0.7, 0.7)
B2 = (0.1, 0.6, 0.3, 0.9)


def make_gt(triplets, boxes=(B0, B1, B2)):
    entities = [
        Entity(id=i, label=f"role_{i:02d}", boxes={"view1": b}) for i, b in enumerate(boxes)
    ]
    return build_graph(entities, triplets)


def pred(predicate, sub_box, obj_box, score=0.9, query_index=0, presence=0.9):
    return PredictedTriplet(
        predicate=predicate,
        subject_box=sub_box,
        object_box=obj_box,
        score=score,
        subject_score=presence,
        object_score=presence,
        query_index=query_index,
    )


class TestMatchTriplets:
    def test_perfect_predictions(self):
        gt = make_gt([(0, "Cut", 1), (1, "Hold", 2)])
        preds = [pred("Cut", B0, B1), pred("Hold", B1, B2, query_index=1)]
        counts = match_triplets(preds, gt)
        assert counts["Cut"].tp == 1 and counts["Cut"].fp == 0
        assert counts["Hold"].tp == 1
        assert all(s.fn == 0 for s in counts.values())

    def test_wrong_predicate_counts_both_sides(self):
        gt = make_gt([(0, "Cut", 1), (1, "Cut", 2)])
        preds = [pred("Cut", B0, B1), pred("Saw", B1, B2, query_index=1)]
        counts = match_triplets(preds, gt)
        assert counts["Cut"].tp == 1 and counts["Cut"].fn == 1
        assert counts["Saw"].fp == 1

    def test_duplicate_prediction_is_fp(self):
        gt = make_gt([(0, "Cut", 1)])
        preds = [pred("Cut", B0, B1, score=0.9), pred("Cut", B0, B1, score=0.8, query_index=1)]
        counts = match_triplets(preds, gt)
        assert counts["Cut"].tp == 1 and counts["Cut"].fp == 1

    def test_score_threshold_filters(self):
        gt = make_gt([(0, "Cut", 1)])
        preds = [pred("Cut", B0, B1, score=0.3)]
        counts = match_triplets(preds, gt, score_thresh=0.5)
        assert counts["Cut"].tp == 0 and counts["Cut"].fn == 1

    def test_presence_threshold_filters(self):
        gt = make_gt([(0, "Cut", 1)])
        preds = [pred("Cut", B0, B1, presence=0.2)]
        counts = match_triplets(preds, gt, score_thresh=0.5)
        assert counts["Cut"].fn == 1

    def test_low_iou_is_fp(self):
        gt = make_gt([(0, "Cut", 1)])
        shifted = (0.6, 0.1, 0.9, 0.3)
        preds = [pred("Cut", shifted, B1)]
        counts = match_triplets(preds, gt)
        assert counts["Cut"].fp == 1 and counts["Cut"].fn == 1

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValueError):
            match_triplets([], make_gt([]), iou_thresh=0.0)


class TestEvaluate:
    def test_all_correct_stream(self):
        gt = make_gt([(0, "Cut", 1)])
        preds = [pred("Cut", B0, B1)]
        report = evaluate([(0, preds), (1, preds)], [(0, gt), (1, gt)])
        assert report.per_class["Cut"].precision == 1.0
        assert report.per_class["Cut"].recall == 1.0
        assert report.per_class["Cut"].f1 == 1.0
        assert report.frame_count == 2

    def test_half_precision_recall(self):
        gt = make_gt([(0, "Cut", 1), (1, "Cut", 2)])
        # one correct, one mislocated prediction
        preds = [pred("Cut", B0, B1), pred("Cut", (0.6, 0.1, 0.9, 0.3), (0.6, 0.6, 0.9, 0.9), query_index=1)]
        report = evaluate([(0, preds)], [(0, gt)])
        stats = report.per_class["Cut"]
        assert stats.precision == 0.5 and stats.recall == 0.5
        assert stats.f1 == pytest.approx(0.5)

    def test_misaligned_frames_rejected(self):
        gt = make_gt([])
        with pytest.raises(ValueError, match="misalignment"):
            evaluate([(0, [])], [(1, gt)])

    def test_accounting_invariant(self):
        rng = np.random.default_rng(0)
        gt = make_gt([(0, "Cut", 1), (1, "Hold", 2), (0, "CloseTo", 2)])
        preds = [
            pred(PREDICATES[rng.integers(14)], B0, B1, score=float(s), query_index=i)
            for i, s in enumerate(rng.uniform(0.5, 1.0, size=6))
        ]
        report = evaluate([(0, preds)], [(0, gt)])
        per_pred_gt = {"Cut": 1, "Hold": 1, "CloseTo": 1}
        for name, stats in report.per_class.items():
            assert stats.tp + stats.fn == per_pred_gt.get(name, 0)


class TestMacro:
    def test_published_average(self):
        assert round(macro_average(REFERENCE_F1), 4) == 0.9029

    def test_mean_of_per_class_values(self):
        per_class = {p: ClassStats(tp=1, fp=1, fn=0) for p in PREDICATES}
        report = EvalReport(per_class=per_class, frame_count=1)
        assert report.macro_precision == pytest.approx(0.5)
        assert report.macro_recall == pytest.approx(1.0)

    def test_zero_support_classes_count_as_zero(self):
        per_class = {p: ClassStats() for p in PREDICATES}
        per_class["Cut"] = ClassStats(tp=2, fp=0, fn=0)
        report = EvalReport(per_class=per_class, frame_count=1)
        assert report.macro_f1 == pytest.approx(1.0 / 14)


class TestGreedyVsOptimal:
    def test_greedy_against_brute_force(self):
        rng = np.random.default_rng(7)
        tax = RelationTaxonomy()
        discrepancies = 0
        for _ in range(150):
            n_gt = int(rng.integers(1, 4))
            triplets, boxes = [], []
            boxes = [
                tuple(np.round([x, y, x + 0.25, y + 0.25], 3))
                for x, y in rng.uniform(0.05, 0.7, size=(4, 2))
            ]
            for _ in range(n_gt):
                sid, oid = rng.choice(4, size=2, replace=False)
                triplets.append((int(sid), tax.predicates[int(rng.integers(3))], int(oid)))
            gt = make_gt(set(triplets), boxes=boxes)
            preds = []
            for qi in range(int(rng.integers(1, 5))):
                sid, oid = rng.choice(4, size=2, replace=False)
                jitter = rng.uniform(-0.05, 0.05, size=2)
                sb = tuple(np.clip(np.asarray(boxes[sid]) + np.r_[jitter, jitter], 0, 1))
                ob = tuple(np.clip(np.asarray(boxes[oid]) + np.r_[jitter, jitter], 0, 1))
                preds.append(
                    pred(tax.predicates[int(rng.integers(3))], sb, ob,
                         score=float(rng.uniform(0.5, 1.0)), query_index=qi)
                )
            counts = match_triplets(preds, gt)
            greedy_tp = sum(s.tp for s in counts.values())
            optimal_tp = max_matching_tp(preds, gt)
            assert greedy_tp <= optimal_tp
            if greedy_tp != optimal_tp:
                discrepancies += 1
        # greedy should essentially always equal the optimum at these sizes
        assert discrepancies <= 3, f"{discrepancies} greedy/optimal gaps in 150 trials"
