import itertools

import numpy as np
import pytest

from src.models.boxes import BoxSet
from src.models.errors import ConfigError
from src.networks.losses import (
    aggregate_loss,
    batch_hard_triplet,
    brute_force_assignment,
    giou,
    giou_tensor,
    hungarian_match,
    iou,
    solve_assignment,
    triplet_loss,
)
from src.numerics.tensor import Parameter, Tensor


class TestGIoU:
    def test_identical(self) -> None:
        assert giou([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(1.0)

    def test_disjoint(self) -> None:
        assert giou([0, 0, 1, 1], [2, 2, 3, 3]) == pytest.approx(-7 / 9, abs=1e-4)

    def test_overlapping(self) -> None:
        assert giou([0, 0, 2, 2], [1, 1, 3, 3]) == pytest.approx(-0.0794, abs=1e-4)

    def test_degenerate(self) -> None:
        assert giou([0, 0, 0, 0], [0, 0, 0, 0]) == 0.0

    def test_symmetric_and_bounded_by_iou(self, rng) -> None:
        for _ in range(50):
            a = np.sort(rng.uniform(0, 1, (2, 2)), axis=0).T.reshape(-1)[[0, 2, 1, 3]]
            b = np.sort(rng.uniform(0, 1, (2, 2)), axis=0).T.reshape(-1)[[0, 2, 1, 3]]
            assert giou(a, b) == pytest.approx(giou(b, a))
            assert giou(a, b) <= iou(a, b) + 1e-12

    def test_tensor_version_matches(self) -> None:
        pred = Tensor(np.array([[0.0, 0.0, 0.5, 0.5], [0.1, 0.1, 0.3, 0.4]]))
        target = np.array([[0.25, 0.25, 0.75, 0.75], [0.1, 0.1, 0.3, 0.4]])
        values = giou_tensor(pred, target).data
        assert values[0] == pytest.approx(giou(pred.data[0], target[0]), abs=1e-5)
        assert values[1] == pytest.approx(1.0, abs=1e-5)


class TestMatching:
    def test_diagonal(self) -> None:
        assignment = solve_assignment(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert assignment.pairs() == [(0, 0), (1, 1)]
        assert assignment.total_cost == 2.0

    def test_equals_exhaustive_search(self, rng) -> None:
        for n_gt, extra in itertools.product(range(1, 5), range(3)):
            cost = rng.uniform(0, 1, (n_gt + extra, n_gt))
            assert solve_assignment(cost).total_cost == pytest.approx(brute_force_assignment(cost))

    def test_single_box(self) -> None:
        gt = BoxSet(boxes=[(0.1, 0.1, 0.4, 0.4)], classes=[1])
        assignment = hungarian_match(np.array([[0.1, 0.1, 0.4, 0.4]]), np.array([[0.2, 0.8]]), gt)
        assert assignment.pairs() == [(0, 0)]

    def test_prefers_matching_box(self) -> None:
        gt = BoxSet(boxes=[(0.6, 0.6, 0.9, 0.9)], classes=[0])
        preds = np.array([[0.0, 0.0, 0.2, 0.2], [0.6, 0.6, 0.9, 0.9]])
        assignment = hungarian_match(preds, np.full((2, 2), 0.5), gt)
        assert assignment.pairs() == [(1, 0)]

    def test_too_many_ground_truths(self) -> None:
        gt = BoxSet(boxes=[(0, 0, 1, 1), (0, 0, 0.5, 0.5)], classes=[0, 0])
        with pytest.raises(ConfigError):
            hungarian_match(np.zeros((1, 4)), np.ones((1, 1)), gt)

    def test_empty_ground_truth(self) -> None:
        assignment = hungarian_match(np.zeros((2, 4)), np.ones((2, 1)), BoxSet())
        assert assignment.pairs() == []


class TestTriplet:
    def test_hinge(self) -> None:
        values = triplet_loss(np.array([1.0, 0.1]), np.array([0.5, 1.0]), 0.3).data
        assert np.allclose(values, [0.8, 0.0])

    def test_no_valid_anchor(self, rng) -> None:
        embeddings = Parameter(rng.standard_normal((3, 4)))
        assert batch_hard_triplet(embeddings, np.array([0, 1, 2]), 0.3).item() == 0.0

    def test_separated_identities(self) -> None:
        embeddings = Tensor(np.array([[0.0, 0.0], [0.0, 0.1], [5.0, 5.0], [5.0, 5.1]]))
        assert batch_hard_triplet(embeddings, np.array([0, 0, 1, 1]), 0.3).item() == 0.0


class TestAggregateLoss:
    def test_weighted_sum(self) -> None:
        assert aggregate_loss([Tensor(1.0), Tensor(1.0)], [2, 3]).item() == 5.0

    def test_zero_weight_blocks_gradient(self) -> None:
        a, b = Parameter(np.array(2.0)), Parameter(np.array(3.0))
        aggregate_loss([a * a, b * b], [1.0, 0.0]).backward()
        assert a.grad == pytest.approx(4.0)
        assert b.grad == pytest.approx(0.0)

    def test_negative_weight(self) -> None:
        with pytest.raises(ConfigError):
            aggregate_loss([Tensor(1.0)], [-1.0])
