"""Synthetic-corpus study of covariate-effect recovery.

Generates term-document matrices whose topic allocations depend on a
real-valued covariate through a logistic link, then measures how well the
covariate effect is recovered when the word-topic matrix is re-estimated for
every dataset (anchors held fixed) versus held at the generating value and
projected by unconstrained least squares.

Because every word must appear somewhere for the matrix dimension to stay
fixed, a seeding pass places one count of each word in a random document.
That pass perturbs the generating probabilities, so recovery is judged
against a pseudo ground truth: the effect estimated from the element-wise
sum of all replicate matrices, which behaves like a single corpus with
``n_replicates`` times as many words per document.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .anchors import AnchorSet
from .corpus import TermDocumentMatrix
from .factorize import fit
from .regress import beta_fit

STRATEGY_RECALCULATED = "recalculated_phi"
STRATEGY_FIXED = "fixed_phi"
STRATEGIES = (STRATEGY_RECALCULATED, STRATEGY_FIXED)

_COLUMN_SUM_TOL = 1e-8


@dataclass(frozen=True)
class SimConfig:
    """Generator settings for the synthetic study.

    ``true_phi`` is an ``n_terms x n_topics`` column-stochastic matrix whose
    rows listed in ``anchor_indices`` are exactly separable: row
    ``anchor_indices[j]`` is zero except in column ``j``.
    ``effect_coefficients`` holds ``(intercept, slope)`` of the logistic
    allocation model: a document with covariate ``z`` assigns topic 0 a
    Beta-distributed share with mean ``expit(intercept + slope * z)`` and
    precision ``allocation_precision``; the remaining share is split evenly
    among the other topics.
    """

    n_terms: int
    n_topics: int
    true_phi: np.ndarray
    anchor_indices: tuple[int, ...]
    doc_grid: tuple[int, ...] = (50, 100)
    words_grid: tuple[int, ...] = (500, 2000)
    n_replicates: int = 100
    effect_coefficients: tuple[float, float] = (0.0, 0.75)
    allocation_precision: float = 500.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "true_phi", np.asarray(self.true_phi, dtype=np.float64))
        object.__setattr__(self, "anchor_indices", tuple(int(i) for i in self.anchor_indices))
        object.__setattr__(self, "doc_grid", tuple(int(d) for d in self.doc_grid))
        object.__setattr__(self, "words_grid", tuple(int(n) for n in self.words_grid))
        if self.n_topics < 1 or self.n_terms < self.n_topics:
            raise ValueError("need 1 <= n_topics <= n_terms")
        if self.true_phi.shape != (self.n_terms, self.n_topics):
            raise ValueError(
                f"true_phi has shape {self.true_phi.shape}, "
                f"expected ({self.n_terms}, {self.n_topics})"
            )
        if np.any(self.true_phi < 0.0):
            raise ValueError("true_phi must be non-negative")
        colsums = self.true_phi.sum(axis=0)
        if np.max(np.abs(colsums - 1.0)) > _COLUMN_SUM_TOL:
            raise ValueError("true_phi columns must sum to 1")
        if len(self.anchor_indices) != self.n_topics:
            raise ValueError("need one anchor index per topic")
        if len(set(self.anchor_indices)) != self.n_topics:
            raise ValueError("anchor indices must be distinct")
        for j, row in enumerate(self.anchor_indices):
            if not 0 <= row < self.n_terms:
                raise ValueError(f"anchor index {row} out of range")
            if self.true_phi[row, j] <= 0.0:
                raise ValueError(f"anchor row {row} has zero weight in its own topic")
            others = np.delete(self.true_phi[row], j)
            if np.any(others != 0.0):
                raise ValueError(f"anchor row {row} appears in more than one topic")
        if not self.doc_grid or min(self.doc_grid) < 1:
            raise ValueError("doc_grid must list positive document counts")
        if not self.words_grid or min(self.words_grid) < 0:
            raise ValueError("words_grid must list non-negative word counts")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")
        if not self.allocation_precision > 0.0:
            raise ValueError("allocation_precision must be positive")


@dataclass(frozen=True)
class ResultRow:
    n_docs: int
    words_per_doc: int
    strategy: str
    replicate: int
    squared_error: float


@dataclass(frozen=True)
class SimResult:
    """Per-replicate squared errors plus their per-cell averages."""

    config: SimConfig
    rows: tuple[ResultRow, ...]
    mse_table: dict = field(repr=False)
    pseudo_truth_effects: dict = field(repr=False)

    def __post_init__(self):
        if any(v < 0.0 for v in self.mse_table.values()):
            raise ValueError("mean squared errors cannot be negative")


def make_true_phi(
    n_terms, n_topics, seed=0, anchor_indices=None, anchor_weights=None,
    background_share=0.9, zipf_exponent=1.2,
):
    """Build a random column-stochastic matrix with exactly separable anchors.

    ``anchor_weights`` gives the probability mass each anchor word carries
    within its own topic: a scalar applies to every topic, a sequence sets
    them per topic, and ``None`` spaces them evenly across [0.35, 0.65] so
    every topic has a prominent anchor whose document counts stay well away
    from zero at moderate document lengths. The remaining mass of a topic
    mixes a background word distribution shared by all topics (fraction
    ``background_share``) with a topic-specific one; both follow a power law
    over word ranks with exponent ``zipf_exponent`` (0 gives flat profiles),
    randomly permuted. The anchors are separable by construction, but a
    corpus drawn from this factor is not guaranteed to hand them back to
    anchor re-selection (heavy shared background words can dominate the
    conical geometry); studies built on it hold the anchor set fixed.
    Returns ``(phi, anchor_indices)``.
    """
    if not 0.0 <= background_share <= 1.0:
        raise ValueError("background_share must lie in [0, 1]")
    if zipf_exponent < 0.0:
        raise ValueError("zipf_exponent must be non-negative")
    rng = np.random.default_rng(seed)
    if anchor_indices is None:
        anchor_indices = tuple(
            int(i) for i in np.sort(rng.choice(n_terms, size=n_topics, replace=False))
        )
    anchor_indices = tuple(int(i) for i in anchor_indices)
    if anchor_weights is None:
        weights = np.linspace(0.35, 0.65, n_topics)
    else:
        weights = np.broadcast_to(
            np.asarray(anchor_weights, dtype=np.float64), (n_topics,)
        ).copy()
    if np.any(weights <= 0.0) or np.any(weights >= 1.0):
        raise ValueError("anchor weights must lie strictly between 0 and 1")

    rest = n_terms - n_topics
    ranks = 1.0 / np.arange(1, rest + 1, dtype=np.float64) ** zipf_exponent
    shared = rng.permutation(ranks)
    shared /= shared.sum()
    specific = np.empty((rest, n_topics))
    for t in range(n_topics):
        specific[:, t] = rng.permutation(ranks)
    specific /= specific.sum(axis=0)
    block = (1.0 - weights) * (
        background_share * shared[:, None] + (1.0 - background_share) * specific
    )
    phi = np.zeros((n_terms, n_topics))
    phi[list(anchor_indices), np.arange(n_topics)] = weights
    keep = np.ones(n_terms, dtype=bool)
    keep[list(anchor_indices)] = False
    phi[keep] = block
    return phi, anchor_indices


def make_config(
    n_terms=200,
    n_topics=4,
    doc_grid=(50, 100),
    words_grid=(500, 2000),
    n_replicates=100,
    effect_coefficients=(0.0, 0.75),
    allocation_precision=500.0,
    anchor_weights=None,
    background_share=0.5,
    zipf_exponent=0.0,
    seed=0,
):
    """Assemble a :class:`SimConfig` with a freshly generated ``true_phi``."""
    phi, anchor_indices = make_true_phi(
        n_terms, n_topics, seed=seed, anchor_weights=anchor_weights,
        background_share=background_share, zipf_exponent=zipf_exponent,
    )
    return SimConfig(
        n_terms=n_terms,
        n_topics=n_topics,
        true_phi=phi,
        anchor_indices=anchor_indices,
        doc_grid=doc_grid,
        words_grid=words_grid,
        n_replicates=n_replicates,
        effect_coefficients=effect_coefficients,
        allocation_precision=allocation_precision,
        seed=seed,
    )


def cell_covariates(cfg, n_docs, words_per_doc):
    """Covariate draw for one grid cell, shared by all of its replicates.

    Keyed by ``(seed, n_docs, words_per_doc)`` so the pseudo ground truth and
    every replicate see the same documents.
    """
    rng = np.random.default_rng([cfg.seed, n_docs, words_per_doc])
    return rng.standard_normal(n_docs)


def _replicate_rng(cfg, n_docs, words_per_doc, replicate):
    return np.random.default_rng([cfg.seed, n_docs, words_per_doc, replicate])


def generate_tdm(cfg, n_docs, words_per_doc, rng, covariates=None):
    """Draw one term-document matrix and its covariate vector.

    Draw order (fixed for reproducibility): covariates when not supplied,
    then per-document Beta allocations, then the multinomial word counts,
    then the seeding pass that drops one count of every word into a uniformly
    random document so no vocabulary row is empty.
    """
    if covariates is None:
        covariates = rng.standard_normal(n_docs)
    z = np.asarray(covariates, dtype=np.float64)
    if z.shape != (n_docs,):
        raise ValueError(f"covariates must have shape ({n_docs},), got {z.shape}")

    if cfg.n_topics == 1:
        alloc = np.ones((1, n_docs))
    else:
        intercept, slope = cfg.effect_coefficients
        mean = expit(intercept + slope * z)
        kappa = cfg.allocation_precision
        lead = rng.beta(mean * kappa, (1.0 - mean) * kappa)
        alloc = np.empty((cfg.n_topics, n_docs))
        alloc[0] = lead
        alloc[1:] = (1.0 - lead) / (cfg.n_topics - 1)

    word_probs = cfg.true_phi @ alloc
    word_probs /= word_probs.sum(axis=0)
    counts = rng.multinomial(words_per_doc, word_probs.T).T.astype(np.float64)
    seeded_docs = rng.integers(0, n_docs, size=cfg.n_terms)
    np.add.at(counts, (np.arange(cfg.n_terms), seeded_docs), 1.0)

    tdm = TermDocumentMatrix(
        sp.csr_matrix(counts),
        tuple(f"w{i:05d}" for i in range(cfg.n_terms)),
        tuple(f"doc{j:05d}" for j in range(n_docs)),
    )
    return tdm, z


def _fixed_phi_theta(cfg, tdm):
    # unconstrained least-squares projection onto the generating topics;
    # entries may be negative and are only clamped when building the
    # regression response
    gram = cfg.true_phi.T @ cfg.true_phi
    cross = (tdm.counts.T @ cfg.true_phi).T
    return np.linalg.solve(gram, cross)


def _theta_for(cfg, tdm, strategy):
    if strategy == STRATEGY_RECALCULATED:
        model, _ = fit(tdm, AnchorSet(cfg.anchor_indices))
        return model.theta
    if strategy == STRATEGY_FIXED:
        return _fixed_phi_theta(cfg, tdm)
    raise ValueError(f"unknown strategy {strategy!r}")


def estimate_effects(cfg, tdm, covariates, strategy):
    """Per-topic regression coefficients from one dataset under one strategy.

    Topic weights are reduced to per-document shares (documents whose weights
    sum to zero or below are dropped), clamped into [0, 1], and fed to a beta
    regression of each topic's share on ``[1, z]``. Returns an
    ``n_topics x 2`` array whose rows are the fitted mean-model coefficients
    ``(intercept, slope)``.
    """
    theta = _theta_for(cfg, tdm, strategy)
    totals = theta.sum(axis=0)
    keep = totals > 0.0
    if not np.any(keep):
        raise ValueError("every document has zero total topic weight")
    shares = theta[:, keep] / totals[keep]
    design = np.column_stack([np.ones(int(keep.sum())), np.asarray(covariates)[keep]])
    effects = np.empty((cfg.n_topics, 2))
    for t in range(cfg.n_topics):
        fit_t = beta_fit(np.clip(shares[t], 0.0, 1.0), design)
        effects[t] = fit_t.mean_coefficients
    return effects


def pseudo_ground_truth(cfg, n_docs, words_per_doc):
    """Aggregate matrix for one cell and the effects fitted on it.

    Sums the cell's ``n_replicates`` matrices element-wise (they share one
    covariate draw, so the sum acts as one corpus with ``n_replicates`` times
    the words per document) and estimates the per-topic coefficients on the
    aggregate with the anchors fixed and the word-topic matrix re-estimated.
    Returns ``(aggregate_tdm, effects)`` with ``effects`` of shape
    ``(n_topics, 2)``.
    """
    z = cell_covariates(cfg, n_docs, words_per_doc)
    total = np.zeros((cfg.n_terms, n_docs))
    for r in range(cfg.n_replicates):
        tdm, _ = generate_tdm(
            cfg, n_docs, words_per_doc, _replicate_rng(cfg, n_docs, words_per_doc, r),
            covariates=z,
        )
        total += tdm.counts.toarray()
    aggregate = TermDocumentMatrix(
        sp.csr_matrix(total),
        tuple(f"w{i:05d}" for i in range(cfg.n_terms)),
        tuple(f"doc{j:05d}" for j in range(n_docs)),
    )
    effects = estimate_effects(cfg, aggregate, z, STRATEGY_RECALCULATED)
    return aggregate, effects


def _one_replicate(cfg, n_docs, words_per_doc, replicate, z):
    try:
        tdm, _ = generate_tdm(
            cfg, n_docs, words_per_doc,
            _replicate_rng(cfg, n_docs, words_per_doc, replicate),
            covariates=z,
        )
        effects = {
            strategy: estimate_effects(cfg, tdm, z, strategy) for strategy in STRATEGIES
        }
    except Exception as exc:
        raise RuntimeError(
            f"replicate {replicate} failed for n_docs={n_docs}, "
            f"words_per_doc={words_per_doc}: {exc}"
        ) from exc
    return tdm.counts, effects


def run_study(cfg, threads=1):
    """Run the full grid study and return a :class:`SimResult`.

    For every ``(n_docs, words_per_doc)`` cell the same replicate matrices
    feed three things: per-replicate effect estimates under both strategies,
    the element-wise aggregate, and (from the aggregate) the pseudo-truth
    effects. A replicate's squared error is the mean over topics and
    coefficients of the squared deviation from the pseudo truth. Replicate
    randomness is keyed by ``(seed, n_docs, words_per_doc, replicate)``, so
    results do not depend on ``threads``.
    """
    if cfg.n_topics < 2:
        raise ValueError("the study needs at least two topics to regress shares on")
    rows = []
    mse_table = {}
    pseudo_truth_effects = {}
    for n_docs in cfg.doc_grid:
        for words_per_doc in cfg.words_grid:
            z = cell_covariates(cfg, n_docs, words_per_doc)
            total = np.zeros((cfg.n_terms, n_docs))
            estimates = {strategy: [] for strategy in STRATEGIES}

            def work(replicate):
                return _one_replicate(cfg, n_docs, words_per_doc, replicate, z)

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    outputs = list(pool.map(work, range(cfg.n_replicates)))
            else:
                outputs = map(work, range(cfg.n_replicates))
            for counts, effects in outputs:
                total += counts.toarray()
                for strategy in STRATEGIES:
                    estimates[strategy].append(effects[strategy])

            aggregate = TermDocumentMatrix(
                sp.csr_matrix(total),
                tuple(f"w{i:05d}" for i in range(cfg.n_terms)),
                tuple(f"doc{j:05d}" for j in range(n_docs)),
            )
            truth = estimate_effects(cfg, aggregate, z, STRATEGY_RECALCULATED)
            pseudo_truth_effects[(n_docs, words_per_doc)] = truth
            for strategy in STRATEGIES:
                errors = [
                    float(np.mean((est - truth) ** 2)) for est in estimates[strategy]
                ]
                rows.extend(
                    ResultRow(n_docs, words_per_doc, strategy, r, err)
                    for r, err in enumerate(errors)
                )
                mse_table[(n_docs, words_per_doc, strategy)] = float(np.mean(errors))
    return SimResult(
        config=cfg,
        rows=tuple(rows),
        mse_table=mse_table,
        pseudo_truth_effects=pseudo_truth_effects,
    )


def write_results_csv(result, path):
    """One row per (cell, strategy, replicate) with its squared error."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n_docs", "words_per_doc", "strategy", "replicate", "squared_error"])
        for row in result.rows:
            writer.writerow(
                [row.n_docs, row.words_per_doc, row.strategy, row.replicate,
                 repr(float(row.squared_error))]
            )


def write_mse_table_csv(result, path):
    """Replicate-averaged squared error per (cell, strategy)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n_docs", "words_per_doc", "strategy", "mse"])
        for (n_docs, words_per_doc, strategy), mse in sorted(result.mse_table.items()):
            writer.writerow([n_docs, words_per_doc, strategy, repr(float(mse))])
