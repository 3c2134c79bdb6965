import math

import pytest
import torch

from tritemp_or.losses import (
    LossWeights,
    align_loss,
    coord_loss,
    focal_loss,
    giou_loss,
    relation_cls_loss,
    total_loss,
)

torch.manual_seed(0)


def rel_error(analytic, numeric):
    analytic = analytic.flatten()
    numeric = numeric.flatten()
    denom = max(numeric.norm().item(), 1e-12)
    return (analytic - numeric).norm().item() / denom


def finite_diff_grad(fn, x, h=1e-4):
    """Central finite differences of a scalar fn w.r.t. tensor x."""
    grad = torch.zeros_like(x)
    flat = x.flatten()
    gflat = grad.flatten()
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        hi = fn(x).item()
        flat[i] = orig - h
        lo = fn(x).item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


class TestFocal:
    def test_limit_perfect_positive(self):
        assert focal_loss(torch.tensor(1.0 - 1e-7), 1.0).item() == pytest.approx(0.0, abs=1e-5)

    def test_hand_value_positive(self):
        val = focal_loss(torch.tensor(0.5), 1.0, alpha=0.25, gamma=2.0).item()
        assert val == pytest.approx(0.043321, abs=1e-5)

    def test_hand_value_negative(self):
        val = focal_loss(torch.tensor(0.9), 0.0, alpha=0.25, gamma=2.0).item()
        assert val == pytest.approx(1.398821, abs=1e-5)

    def test_reduces_to_scaled_bce(self):
        # gamma=0, alpha=0.5 gives exactly half the binary cross-entropy
        for p, y in [(0.3, 1.0), (0.8, 0.0), (0.5, 1.0)]:
            got = focal_loss(torch.tensor(p, dtype=torch.float64), y, alpha=0.5, gamma=0.0).item()
            bce = -(y * math.log(p) + (1 - y) * math.log(1 - p))
            assert got == pytest.approx(0.5 * bce, rel=1e-9)

    def test_out_of_range_clamped(self):
        assert torch.isfinite(focal_loss(torch.tensor(0.0), 1.0))
        assert torch.isfinite(focal_loss(torch.tensor(1.0), 0.0))


class TestGiou:
    def test_identical_boxes(self):
        box = torch.tensor([0.1, 0.2, 0.5, 0.6])
        assert giou_loss(box, box).item() == pytest.approx(0.0, abs=1e-7)

    def test_corner_touching(self):
        loss = giou_loss(torch.tensor([0.0, 0.0, 1.0, 1.0]), torch.tensor([1.0, 1.0, 2.0, 2.0]))
        assert loss.item() == pytest.approx(1.5, abs=1e-6)

    def test_containment(self):
        loss = giou_loss(torch.tensor([0.0, 0.0, 2.0, 2.0]), torch.tensor([0.0, 0.0, 1.0, 1.0]))
        assert loss.item() == pytest.approx(0.75, abs=1e-6)

    def test_zero_area_rejected(self):
        with pytest.raises(ValueError, match="zero-area"):
            giou_loss(torch.tensor([0.1, 0.1, 0.1, 0.5]), torch.tensor([0.0, 0.0, 1.0, 1.0]))

    def test_range(self):
        g = torch.Generator().manual_seed(3)
        for _ in range(50):
            pts = torch.rand(2, 2, 2, generator=g)
            boxes = torch.cat([pts.min(dim=1).values, pts.min(dim=1).values + 0.05 + pts.max(dim=1).values * 0.5], dim=-1)
            loss = giou_loss(boxes[0], boxes[1])
            assert 0.0 <= loss.item() < 2.0


class TestRelationCls:
    def test_denominator_is_positive_count(self):
        scores = torch.full((2, 3), 0.5)
        labels = torch.tensor([[1.0, 0, 0], [1.0, 1.0, 0]])
        expected = focal_loss(scores, labels).sum() / 3.0
        assert relation_cls_loss(scores, labels).item() == pytest.approx(expected.item())

    def test_all_negative_clamps(self):
        scores = torch.full((2, 3), 0.1)
        labels = torch.zeros(2, 3)
        expected = focal_loss(scores, labels).sum()  # denominator clamps to 1
        assert relation_cls_loss(scores, labels).item() == pytest.approx(expected.item())

    def test_perfect_scores_near_zero(self):
        labels = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
        scores = labels.clamp(1e-6, 1 - 1e-6)
        assert relation_cls_loss(scores, labels).item() == pytest.approx(0.0, abs=1e-4)

    def test_permutation_invariant(self):
        g = torch.Generator().manual_seed(5)
        scores = torch.rand(6, 14, generator=g, dtype=torch.float64) * 0.98 + 0.01
        labels = (torch.rand(6, 14, generator=g) > 0.7).double()
        perm = torch.randperm(6, generator=g)
        a = relation_cls_loss(scores, labels)
        b = relation_cls_loss(scores[perm], labels[perm])
        assert a.item() == pytest.approx(b.item(), rel=1e-10)

    def test_empty(self):
        assert relation_cls_loss(torch.zeros(0, 14), torch.zeros(0, 14)).item() == 0.0


class TestAlign:
    def test_exact_match_zero(self):
        u = torch.tensor([[0.3, -0.2, 0.5]])
        assert align_loss(u, u.clone()).item() == 0.0

    def test_hand_value(self):
        u = torch.tensor([[0.0, 0.0]])
        t = torch.tensor([[1.0, 1.0]])
        assert align_loss(u, t).item() == pytest.approx(1.0)

    def test_empty_zero_and_no_grad(self):
        u = torch.zeros(0, 8, requires_grad=True)
        loss = align_loss(u, torch.zeros(0, 8))
        assert loss.item() == 0.0

    def test_nonnegative(self):
        g = torch.Generator().manual_seed(11)
        u = torch.randn(5, 16, generator=g)
        t = torch.randn(5, 16, generator=g)
        assert align_loss(u, t).item() >= 0.0


class TestTotal:
    def test_paper_weights(self):
        w = LossWeights(lambda_cls=1.0, lambda_text=0.1)
        val = total_loss(torch.tensor(2.0), torch.tensor(1.0), torch.tensor(0.5), w)
        assert val.item() == pytest.approx(3.05)

    def test_zero(self):
        w = LossWeights()
        assert total_loss(torch.tensor(0.0), torch.tensor(0.0), torch.tensor(0.0), w).item() == 0.0

    def test_zero_lambda_text_kills_gradient(self):
        text = torch.tensor(0.7, requires_grad=True)
        w = LossWeights(lambda_text=0.0)
        total = total_loss(torch.tensor(1.0), torch.tensor(1.0), text, w)
        total.backward()
        assert text.grad.item() == 0.0

    def test_non_finite_identified(self):
        w = LossWeights()
        with pytest.raises(ValueError, match="cls"):
            total_loss(torch.tensor(1.0), torch.tensor(float("nan")), torch.tensor(0.0), w)


class TestCoordLoss:
    def _random_instance(self, seed, q=3, g=2, views=2):
        gen = torch.Generator().manual_seed(seed)
        pred = torch.rand(q, views, 2, 4, generator=gen, dtype=torch.float64) * 0.3 + torch.tensor([0.4, 0.4, 0.2, 0.2], dtype=torch.float64)
        gt = torch.rand(g, views, 2, 4, generator=gen, dtype=torch.float64) * 0.3 + torch.tensor([0.4, 0.4, 0.2, 0.2], dtype=torch.float64)
        sub = torch.rand(q, generator=gen, dtype=torch.float64) * 0.8 + 0.1
        obj = torch.rand(q, generator=gen, dtype=torch.float64) * 0.8 + 0.1
        assignment = [(i, i) for i in range(min(q, g))]
        return pred, sub, obj, gt, assignment

    def test_perfect_predictions_near_zero(self):
        gt = torch.tensor([[[[0.5, 0.5, 0.2, 0.2]] * 2] * 2], dtype=torch.float64)
        pred = gt.clone()
        sub = torch.tensor([1.0 - 1e-7], dtype=torch.float64)
        obj = torch.tensor([1.0 - 1e-7], dtype=torch.float64)
        loss = coord_loss(pred, sub, obj, gt, [(0, 0)], LossWeights())
        assert loss.item() == pytest.approx(0.0, abs=1e-5)

    def test_no_gt_only_presence_term(self):
        pred = torch.full((2, 2, 2, 4), 0.5, dtype=torch.float64)
        sub = torch.tensor([0.3, 0.2], dtype=torch.float64)
        obj = torch.tensor([0.4, 0.1], dtype=torch.float64)
        loss = coord_loss(pred, sub, obj, torch.zeros(0, 2, 2, 4, dtype=torch.float64), [], LossWeights())
        expected = focal_loss(torch.stack([sub, obj], dim=-1), torch.zeros(2, 2, dtype=torch.float64)).sum()
        assert loss.item() == pytest.approx(expected.item())

    def test_gradient_matches_finite_differences(self):
        pred, sub, obj, gt, assignment = self._random_instance(seed=21, q=2, g=2)
        w = LossWeights()

        pred = pred.clone().requires_grad_(True)
        loss = coord_loss(pred, sub, obj, gt, assignment, w)
        (analytic,) = torch.autograd.grad(loss, pred)
        numeric = finite_diff_grad(
            lambda x: coord_loss(x, sub, obj, gt, assignment, w), pred.detach().clone()
        )
        assert rel_error(analytic, numeric) < 1e-4


class TestLossGradientOracles:
    """Central finite differences vs autograd on random small instances."""

    def test_focal_gradient(self):
        gen = torch.Generator().manual_seed(2)
        for _ in range(20):
            p = (torch.rand(4, dtype=torch.float64, generator=gen) * 0.8 + 0.1).requires_grad_(True)
            y = (torch.rand(4, generator=gen) > 0.5).double()
            loss = focal_loss(p, y).sum()
            (analytic,) = torch.autograd.grad(loss, p)
            numeric = finite_diff_grad(lambda x: focal_loss(x, y).sum(), p.detach().clone())
            assert rel_error(analytic, numeric) < 1e-4

    def test_giou_gradient(self):
        gen = torch.Generator().manual_seed(3)
        for _ in range(20):
            centers = torch.rand(2, 2, dtype=torch.float64, generator=gen) * 0.4 + 0.3
            sizes = torch.rand(2, 2, dtype=torch.float64, generator=gen) * 0.3 + 0.1
            boxes = torch.cat([centers - sizes / 2, centers + sizes / 2], dim=-1)
            a = boxes[0].clone().requires_grad_(True)
            b = boxes[1]
            loss = giou_loss(a, b)
            (analytic,) = torch.autograd.grad(loss, a)
            numeric = finite_diff_grad(lambda x: giou_loss(x, b), a.detach().clone())
            assert rel_error(analytic, numeric) < 1e-4

    def test_relation_cls_gradient(self):
        gen = torch.Generator().manual_seed(4)
        for _ in range(20):
            scores = (torch.rand(3, 5, dtype=torch.float64, generator=gen) * 0.8 + 0.1).requires_grad_(True)
            labels = (torch.rand(3, 5, generator=gen) > 0.6).double()
            loss = relation_cls_loss(scores, labels)
            (analytic,) = torch.autograd.grad(loss, scores)
            numeric = finite_diff_grad(lambda x: relation_cls_loss(x, labels), scores.detach().clone())
            assert rel_error(analytic, numeric) < 1e-4

    def test_align_gradient(self):
        gen = torch.Generator().manual_seed(5)
        for _ in range(20):
            u = torch.randn(3, 6, dtype=torch.float64, generator=gen).requires_grad_(True)
            t = torch.randn(3, 6, dtype=torch.float64, generator=gen)
            loss = align_loss(u, t)
            (analytic,) = torch.autograd.grad(loss, u)
            numeric = finite_diff_grad(lambda x: align_loss(x, t), u.detach().clone())
            assert rel_error(analytic, numeric) < 1e-4
