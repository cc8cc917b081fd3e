"""Topic factorization of a count matrix around a fixed anchor set.

With anchor rows X_a (one distinctive term per topic) the remaining rows
are fitted as non-negative conical combinations Y of the anchors.  Topic
weights follow in closed form: the anchor share of topic j is
``lambda_j = 1 / (1 + sum_i y_ij)``, the term-topic matrix stacks
``diag(lambda)`` on the anchor rows and ``Y * lambda`` elsewhere, and the
topic-document matrix is the anchor block rescaled by ``1 / lambda``.
Columns of the term-topic matrix sum to one by construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .anchors import AnchorSet
from .corpus import TermDocumentMatrix
from .nnls import NnlsError, solve_nnls_batch

__all__ = [
    "TopicModel",
    "FitReport",
    "fit",
    "rank_topics",
    "top_words",
    "save_model",
    "load_model",
]

# block size (in matrix entries) for the chunked residual computation
_RESIDUAL_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class TopicModel:
    """Fitted factorization X ~ phi @ theta.

    phi is (V, T) column-stochastic, theta is (T, D) non-negative.
    ``importance_rank`` permutes topics by decreasing inverse anchor share
    1/lambda, ties resolved in pick order.
    """

    phi: np.ndarray
    theta: np.ndarray
    lambdas: np.ndarray
    anchors: AnchorSet
    anchor_terms: tuple
    importance_rank: tuple
    vocabulary: tuple
    doc_ids: tuple

    @property
    def n_topics(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class FitReport:
    frobenius_residual: float
    relative_residual: float
    nnls_iterations_total: int
    nnls_iterations_max: int
    empty_documents: tuple


def fit(
    tdm: TermDocumentMatrix,
    anchors: AnchorSet,
    tol_kkt: float = 1e-8,
    max_iter: int | None = None,
) -> tuple[TopicModel, FitReport]:
    """Factorize around the given anchors; returns the model and a fit report.

    Raises :class:`NnlsError` (with the term named) if a row solve stalls,
    and ``ValueError`` for an anchor whose row is entirely zero.
    """
    X = tdm.counts
    V, D = X.shape
    idx = np.asarray(anchors.indices, dtype=int)
    T = idx.size
    if T == 0:
        raise ValueError("anchor set is empty")
    if idx.min() < 0 or idx.max() >= V:
        raise ValueError("anchor index out of range")

    anchor_block = X[idx].toarray()
    dead = np.flatnonzero(anchor_block.sum(axis=1) == 0.0)
    if dead.size:
        term = tdm.vocabulary[idx[dead[0]]]
        raise ValueError(f"anchor term {term!r} has an all-zero row")

    mask = np.ones(V, dtype=bool)
    mask[idx] = False
    other = np.flatnonzero(mask)

    design = anchor_block.T  # (D, T)
    if other.size:
        try:
            solutions = solve_nnls_batch(design, X[other], tol_kkt=tol_kkt, max_iter=max_iter)
        except NnlsError as err:
            term = tdm.vocabulary[other[err.row]] if err.row is not None else "?"
            raise NnlsError(
                f"row for term {term!r} did not converge: {err}",
                err.x, err.kkt_violation, err.iterations, row=err.row,
            ) from err
        Y = np.vstack([s.x for s in solutions])
        iters = [s.iterations for s in solutions]
    else:
        Y = np.zeros((0, T))
        iters = [0]

    lambdas = 1.0 / (1.0 + Y.sum(axis=0))
    phi = np.zeros((V, T))
    phi[idx, np.arange(T)] = lambdas
    phi[other] = Y * lambdas
    theta = anchor_block / lambdas[:, None]

    order = tuple(sorted(range(T), key=lambda j: -1.0 / lambdas[j]))
    model = TopicModel(
        phi=phi,
        theta=theta,
        lambdas=lambdas,
        anchors=anchors,
        anchor_terms=tuple(tdm.vocabulary[i] for i in idx),
        importance_rank=order,
        vocabulary=tdm.vocabulary,
        doc_ids=tdm.doc_ids,
    )

    frob2 = 0.0
    rows_per_chunk = max(1, _RESIDUAL_CHUNK_ENTRIES // max(D, 1))
    for start in range(0, V, rows_per_chunk):
        stop = min(start + rows_per_chunk, V)
        block = phi[start:stop] @ theta
        block -= X[start:stop].toarray()
        frob2 += float(np.einsum("ij,ij->", block, block))
    xnorm = float(np.sqrt((X.data**2).sum()))
    frob = float(np.sqrt(frob2))

    empty = np.flatnonzero(anchor_block.sum(axis=0) == 0.0)
    report = FitReport(
        frobenius_residual=frob,
        relative_residual=frob / xnorm,
        nnls_iterations_total=int(np.sum(iters)),
        nnls_iterations_max=int(np.max(iters)),
        empty_documents=tuple(tdm.doc_ids[j] for j in empty),
    )
    return model, report


def rank_topics(model: TopicModel) -> list:
    """Topics ordered by decreasing inverse anchor share 1/lambda.

    Returns (topic index, anchor term, 1/lambda) triples.
    """
    return [
        (j, model.anchor_terms[j], float(1.0 / model.lambdas[j]))
        for j in model.importance_rank
    ]


def top_words(model: TopicModel, topic: int, k: int = 10) -> list:
    """The k heaviest terms of one topic; ties resolve in vocabulary order."""
    if not 0 <= topic < model.n_topics:
        raise ValueError(f"topic {topic} out of range")
    weights = model.phi[:, topic]
    order = sorted(range(len(weights)), key=lambda i: (-weights[i], i))
    return [(model.vocabulary[i], float(weights[i])) for i in order[:k]]


# ---------------------------------------------------------------------------
# model directory serialization


def save_model(model: TopicModel, directory) -> None:
    """Write phi.csv, theta.csv, lambdas.json and anchors.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / "phi.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term", *model.anchor_terms])
        for i, term in enumerate(model.vocabulary):
            writer.writerow([term, *(repr(float(v)) for v in model.phi[i])])

    with open(directory / "theta.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic", *model.doc_ids])
        for j, term in enumerate(model.anchor_terms):
            writer.writerow([term, *(repr(float(v)) for v in model.theta[j])])

    (directory / "lambdas.json").write_text(
        json.dumps(
            {
                "lambdas": [float(v) for v in model.lambdas],
                "importance_rank": [int(j) for j in model.importance_rank],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    anchors_payload = [
        {
            "term": model.anchor_terms[j],
            "index": int(model.anchors.indices[j]),
            "order": j,
            "residual": (
                float(model.anchors.pick_residuals[j])
                if j < len(model.anchors.pick_residuals)
                else None
            ),
        }
        for j in range(model.n_topics)
    ]
    (directory / "anchors.json").write_text(
        json.dumps(
            {
                "anchors": anchors_payload,
                "excluded_terms": sorted(model.anchors.excluded_terms),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def load_model(directory) -> TopicModel:
    directory = Path(directory)

    with open(directory / "phi.csv", "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        anchor_terms = tuple(header[1:])
        vocabulary, phi_rows = [], []
        for row in reader:
            vocabulary.append(row[0])
            phi_rows.append([float(v) for v in row[1:]])
    phi = np.asarray(phi_rows)

    with open(directory / "theta.csv", "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        doc_ids = tuple(next(reader)[1:])
        theta = np.asarray([[float(v) for v in row[1:]] for row in reader])

    meta = json.loads((directory / "lambdas.json").read_text(encoding="utf-8"))
    anchors_meta = json.loads((directory / "anchors.json").read_text(encoding="utf-8"))
    entries = sorted(anchors_meta["anchors"], key=lambda e: e["order"])
    residuals = tuple(e["residual"] for e in entries if e["residual"] is not None)
    anchors = AnchorSet(
        indices=tuple(e["index"] for e in entries),
        excluded_terms=frozenset(anchors_meta.get("excluded_terms", ())),
        pick_residuals=residuals if len(residuals) == len(entries) else (),
    )
    return TopicModel(
        phi=phi,
        theta=theta,
        lambdas=np.asarray(meta["lambdas"], dtype=float),
        anchors=anchors,
        anchor_terms=anchor_terms,
        importance_rank=tuple(int(j) for j in meta["importance_rank"]),
        vocabulary=tuple(vocabulary),
        doc_ids=doc_ids,
    )
