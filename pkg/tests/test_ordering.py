from __future__ import annotations

import itertools

import numpy as np
import pytest

from asmkit.errors import InvalidArgumentError, ParseError
from asmkit.metrics import kendall_tau
from asmkit.ordering import (
    hungarian_match,
    load_similarity_matrix,
    matrix_to_order,
    maxpool_patches,
    order_to_matrix,
)


def brute_force_best(sim: np.ndarray):
    n = sim.shape[0]
    best_val = -np.inf
    best_perm = None
    for perm in itertools.permutations(range(n)):
        val = sum(sim[i, perm[i]] for i in range(n))
        if val > best_val + 1e-15:
            best_val = val
            best_perm = perm
    return best_val, best_perm


class TestMaxpool:
    def test_k1_identity(self, rng):
        feats = rng.normal(size=(4, 1, 8))
        np.testing.assert_array_equal(maxpool_patches(feats), feats[:, 0, :])

    def test_elementwise_max(self):
        feats = np.array([[[1.0, 5.0], [3.0, 2.0]]])
        np.testing.assert_array_equal(maxpool_patches(feats), [[3.0, 5.0]])

    def test_equal_patches(self):
        feats = np.full((3, 4, 2), 7.0)
        np.testing.assert_array_equal(maxpool_patches(feats), np.full((3, 2), 7.0))

    def test_empty_patch_axis(self):
        with pytest.raises(InvalidArgumentError):
            maxpool_patches(np.empty((2, 0, 3)))


class TestHungarian:
    def test_diagonal_dominant(self):
        sim = np.eye(4) * 10 + 0.1
        assert hungarian_match(sim).order == (0, 1, 2, 3)

    def test_three_by_three(self):
        sim = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        result = hungarian_match(sim)
        assert result.order == (1, 0, 2)
        assert result.total_similarity == pytest.approx(3.0)

    def test_all_equal_breaks_ties_to_identity(self):
        assert hungarian_match(np.ones((5, 5))).order == (0, 1, 2, 3, 4)

    def test_matches_brute_force_on_random(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 9))
            sim = rng.normal(size=(n, n))
            result = hungarian_match(sim)
            best_val, best_perm = brute_force_best(sim)
            assert result.total_similarity == pytest.approx(best_val, abs=1e-9)
            # with continuous entries the optimum is almost surely unique
            assert result.order == best_perm

    def test_constant_shift_invariance(self, rng):
        sim = rng.normal(size=(6, 6))
        assert hungarian_match(sim).order == hungarian_match(sim + 13.7).order

    def test_gt_indicator_gives_perfect_tau(self, rng):
        n = 7
        gt = list(rng.permutation(n))
        sim = np.zeros((n, n))
        sim[np.arange(n), gt] = 1.0
        predicted = hungarian_match(sim).order
        assert kendall_tau(list(predicted), gt) == 1.0

    def test_rejects_bad_input(self):
        with pytest.raises(InvalidArgumentError):
            hungarian_match(np.ones((2, 3)))
        with pytest.raises(InvalidArgumentError):
            hungarian_match(np.array([[np.nan, 1], [1, 0]]))


class TestPermutationMatrix:
    def test_identity(self):
        np.testing.assert_array_equal(order_to_matrix([0, 1]), np.eye(2, dtype=int))

    def test_swap(self):
        np.testing.assert_array_equal(
            order_to_matrix([1, 0]), np.array([[0, 1], [1, 0]])
        )

    def test_roundtrip_random(self, rng):
        order = tuple(int(i) for i in rng.permutation(20))
        assert matrix_to_order(order_to_matrix(order)) == order

    def test_duplicate_rejected(self):
        with pytest.raises(InvalidArgumentError):
            order_to_matrix([0, 0, 1])

    def test_bad_matrix_rejected(self):
        with pytest.raises(InvalidArgumentError):
            matrix_to_order(np.array([[1, 1], [0, 0]]))


class TestMatrixFile:
    def test_load(self, tmp_path):
        path = tmp_path / "sim.txt"
        path.write_text("# comment\n0.5 1.0\n-2 3e-1\n")
        np.testing.assert_allclose(
            load_similarity_matrix(path), [[0.5, 1.0], [-2.0, 0.3]]
        )

    def test_ragged_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 2\n3\n")
        with pytest.raises(ParseError):
            load_similarity_matrix(path)
