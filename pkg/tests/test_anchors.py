"""Anchor selection tested against a brute-force greedy projection oracle."""

import numpy as np
import pytest

from brett.anchors import AnchorSet, residual_norms, select_anchors
from synth import as_tdm, make_separable


def greedy_projection_reference(X, n_picks):
    """Naive farthest-from-span selection with explicit orthogonalization.

    Independent of the QR implementation: residual rows are updated by
    subtracting the projection onto each newly picked direction.
    """
    R = np.asarray(X, dtype=float).copy()
    picks = []
    for _ in range(n_picks):
        norms = np.linalg.norm(R, axis=1)
        j = int(np.argmax(norms))  # argmax takes the first max = lowest index
        picks.append(j)
        u = R[j] / norms[j]
        R -= np.outer(R @ u, u)
    return picks


class TestKnownGeometry:
    def test_three_rows_two_picks(self):
        X = np.array([[3.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        result = select_anchors(as_tdm(X), 2)
        assert result.indices == (0, 1)
        np.testing.assert_allclose(result.pick_residuals, [3.0, 2.0])

    def test_first_pick_is_largest_row(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(size=(15, 6))
        result = select_anchors(as_tdm(X), 1)
        assert result.indices[0] == int(np.argmax(np.linalg.norm(X, axis=1)))

    def test_tie_breaks_to_lowest_index(self):
        X = np.eye(4)[[2, 0, 1, 3]]  # permuted identity: all norms equal
        result = select_anchors(as_tdm(X), 4)
        assert result.indices == (0, 1, 2, 3)

    def test_rank_deficiency_is_an_error(self):
        X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # rank one
        with pytest.raises(ValueError, match="rank deficient"):
            select_anchors(as_tdm(X), 2)

    def test_too_many_anchors_requested(self):
        X = np.eye(3)
        with pytest.raises(ValueError, match="candidate"):
            select_anchors(as_tdm(X), 4)
        with pytest.raises(ValueError):
            select_anchors(as_tdm(X), 0)


class TestOracleEquivalence:
    def test_matches_greedy_projection_on_random_matrices(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            X = rng.uniform(size=(20, 10))
            T = int(rng.integers(1, 9))
            got = select_anchors(as_tdm(X), T)
            assert list(got.indices) == greedy_projection_reference(X, T)

    def test_pick_residuals_match_span_distances(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(size=(30, 12))
        tdm = as_tdm(X)
        result = select_anchors(tdm, 6)
        # residual at pick k equals the distance to the span of picks < k
        for k in range(6):
            partial = AnchorSet(result.indices[:k]) if k else None
            dists = residual_norms(tdm, partial)
            assert result.pick_residuals[k] == pytest.approx(
                dists[result.indices[k]], rel=1e-9
            )


class TestSeparableRecovery:
    def test_exact_recovery(self):
        rng = np.random.default_rng(2024)
        for _ in range(10):
            V = int(rng.integers(30, 120))
            T = int(rng.integers(2, 9))
            D = int(rng.integers(T + 5, 80))
            tdm, _, _, true_anchors, _ = make_separable(rng, V, T, D)
            got = select_anchors(tdm, T)
            assert sorted(got.indices) == sorted(true_anchors.tolist())

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(77)
        X = rng.uniform(size=(18, 7))
        base = select_anchors(as_tdm(X), 5).indices
        perm = rng.permutation(18)
        permuted = select_anchors(as_tdm(X[perm]), 5).indices
        inverse = np.argsort(perm)
        assert list(permuted) == [int(inverse[b]) for b in base]


class TestExclusions:
    def test_excluded_term_is_skipped(self):
        X = np.array([[3.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        tdm = as_tdm(X)
        full = select_anchors(tdm, 2)
        assert full.indices == (0, 1)
        trimmed = select_anchors(tdm, 2, excluded_terms={"term0000"})
        assert 0 not in trimmed.indices
        assert trimmed.indices == (1, 2)
        assert trimmed.excluded_terms == frozenset({"term0000"})

    def test_excluded_terms_never_selected(self):
        rng = np.random.default_rng(5)
        tdm, _, _, true_anchors, _ = make_separable(rng, 60, 5, 40)
        banned = {tdm.vocabulary[true_anchors[0]], tdm.vocabulary[true_anchors[2]]}
        got = select_anchors(tdm, 5, excluded_terms=banned)
        banned_idx = {true_anchors[0], true_anchors[2]}
        assert not banned_idx & set(got.indices)


class TestResidualNorms:
    def test_empty_selection_gives_row_norms(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(9, 4))
        np.testing.assert_allclose(
            residual_norms(as_tdm(X)), np.linalg.norm(X, axis=1), rtol=1e-12
        )

    def test_selected_rows_report_zero(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(12, 5))
        tdm = as_tdm(X)
        result = select_anchors(tdm, 4)
        dists = residual_norms(tdm, result)
        assert all(dists[i] == 0.0 for i in result.indices)
        # rows inside the selected span are (numerically) at distance zero
        combo = 0.3 * X[result.indices[0]] + 0.7 * X[result.indices[1]]
        aug = as_tdm(np.vstack([X, combo]))
        dists = residual_norms(aug, AnchorSet(result.indices))
        assert dists[-1] == pytest.approx(0.0, abs=1e-10)
