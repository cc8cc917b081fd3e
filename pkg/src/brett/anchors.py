"""Anchor-row selection by successive projection.

Geometrically the routine picks, one at a time, the vocabulary row of the
count matrix farthest from the span of the rows picked so far.  That
greedy projection is exactly the pivot order of a Householder QR with
column pivoting applied to X', so it is implemented that way: only the
first T reflections are formed, trailing column norms are downdated after
each one (with a recompute guard against cancellation), and ties break to
the lowest row index so reruns are reproducible.

Rows of excluded terms are removed from candidacy before selection but
keep their original indices in the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .corpus import TermDocumentMatrix

__all__ = ["AnchorSet", "select_anchors", "residual_norms"]

# residual norms below tol_scale * (largest row norm) count as rank exhaustion
RANK_TOL_SCALE = 1e-10


@dataclass(frozen=True)
class AnchorSet:
    """Selected anchor rows, in pick order."""

    indices: tuple
    excluded_terms: frozenset = frozenset()
    pick_residuals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "excluded_terms", frozenset(self.excluded_terms))
        object.__setattr__(self, "pick_residuals", tuple(float(r) for r in self.pick_residuals))
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("anchor indices must be distinct")

    @property
    def n_topics(self) -> int:
        return len(self.indices)


def _pivoted_qr_select(M: np.ndarray, n_picks: int) -> tuple[list[int], list[float]]:
    """First ``n_picks`` pivots of a column-pivoted Householder QR of M.

    M has one column per candidate row of the original matrix; it is
    overwritten in place.
    """
    m, n = M.shape
    R = M
    norms = np.sqrt(np.einsum("ij,ij->j", R, R))
    ref_norms = norms.copy()  # norms at last exact recompute, for the downdate guard
    tol = RANK_TOL_SCALE * (norms.max() if n else 0.0)
    order = np.arange(n)
    picks: list[int] = []
    residuals: list[float] = []

    for k in range(n_picks):
        sub = norms[k:]
        best = sub.max()
        if best <= tol:
            raise ValueError(
                f"matrix is rank deficient: only {k} independent rows available "
                f"for {n_picks} requested anchors"
            )
        # lowest original index wins among exact ties
        tied = k + np.flatnonzero(sub == best)
        j = tied[np.argmin(order[tied])]
        if j != k:
            R[:, [k, j]] = R[:, [j, k]]
            order[[k, j]] = order[[j, k]]
            norms[[k, j]] = norms[[j, k]]
            ref_norms[[k, j]] = ref_norms[[j, k]]
        picks.append(int(order[k]))
        residuals.append(float(norms[k]))

        # Householder reflection zeroing column k below row k
        col = R[k:, k]
        alpha = np.linalg.norm(col)
        if alpha == 0.0:
            continue
        v = col.copy()
        v[0] += np.copysign(alpha, col[0] if col[0] != 0.0 else 1.0)
        beta = 2.0 / float(v @ v)
        if k + 1 < n:
            tail = R[k:, k + 1:]
            tail -= beta * np.outer(v, v @ tail)
            # downdate trailing norms; recompute exactly when cancellation bites
            drop = np.abs(R[k, k + 1:]) / np.where(norms[k + 1:] > 0, norms[k + 1:], 1.0)
            factor = np.sqrt(np.clip(1.0 - drop**2, 0.0, None))
            new = norms[k + 1:] * factor
            unsafe = (new <= 1e-7 * ref_norms[k + 1:]) & (norms[k + 1:] > 0)
            norms[k + 1:] = new
            if np.any(unsafe):
                idx = k + 1 + np.flatnonzero(unsafe)
                exact = np.sqrt(np.einsum("ij,ij->j", R[k + 1:, idx], R[k + 1:, idx]))
                norms[idx] = exact
                ref_norms[idx] = exact
        R[k + 1:, k] = 0.0
    return picks, residuals


def select_anchors(
    tdm: TermDocumentMatrix, n_topics: int, excluded_terms=()
) -> AnchorSet:
    """Pick ``n_topics`` anchor rows of the count matrix.

    Raises if the requested count exceeds the number of candidate rows or
    the numerical rank of the candidate block.
    """
    if n_topics < 1:
        raise ValueError("n_topics must be at least 1")
    excluded = frozenset(excluded_terms)
    vocab = tdm.vocabulary
    keep = np.array([i for i, t in enumerate(vocab) if t not in excluded], dtype=int)
    if n_topics > keep.size:
        raise ValueError(
            f"requested {n_topics} anchors but only {keep.size} candidate terms remain"
        )
    X = tdm.counts
    Xk = X[keep] if keep.size != X.shape[0] else X
    # columns of M are candidate rows of X; F-order so column ops stay contiguous
    if sp.issparse(Xk):
        M = Xk.T.toarray(order="F")
    else:
        M = np.array(np.asarray(Xk, dtype=float).T, order="F", copy=True)
    picks, residuals = _pivoted_qr_select(M, n_topics)
    indices = tuple(int(keep[p]) for p in picks)
    return AnchorSet(indices=indices, excluded_terms=excluded, pick_residuals=tuple(residuals))


def residual_norms(tdm: TermDocumentMatrix, anchors: AnchorSet | None = None) -> np.ndarray:
    """Distance of every vocabulary row to the span of the anchor rows.

    With no anchors this is just the row 2-norms; selected rows report 0.
    """
    X = tdm.counts
    row_sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    if anchors is None or not anchors.indices:
        return np.sqrt(row_sq)
    idx = list(anchors.indices)
    A = X[idx].toarray() if sp.issparse(X) else np.asarray(X[idx], dtype=float)  # (k, D)
    Q, _ = np.linalg.qr(A.T)  # (D, k) orthonormal basis of the span
    proj = X @ Q  # (V, k)
    proj_sq = np.einsum("ij,ij->i", proj, proj)
    out = np.sqrt(np.clip(row_sq - proj_sq, 0.0, None))
    out[idx] = 0.0
    return out
