"""Corpus ingestion: preprocessing, count matrices and design matrices.

The cleaning pipeline is deliberately boring — lowercase, phrase merges,
acronym expansion, punctuation/number/stopword removal — but the order
matters and the whole thing is idempotent: running it twice is the same
as running it once.  Merged phrases keep an underscore as the joiner, and
the underscore is the one piece of punctuation the tokenizer preserves.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread, mmwrite

__all__ = [
    "Document",
    "PreprocessConfig",
    "TermDocumentMatrix",
    "DesignMatrix",
    "preprocess",
    "build_tdm",
    "build_design",
    "load_documents_jsonl",
    "load_documents_csv",
    "save_tdm",
    "load_tdm",
]

# strip everything that is neither a word character nor whitespace;
# underscores count as word characters, so merged phrases survive
_NON_TOKEN_RE = re.compile(r"[^\w\s]")


@dataclass
class Document:
    """One document: an identifier, raw or cleaned text, and covariates."""

    id: str
    text: str
    covariates: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the cleaning pipeline.

    ngram_merges maps a whitespace-separated phrase to its merged token
    (e.g. ``"india pale ale" -> "india_pale_ale"``); merges run on the
    raw text before tokenization.  acronym_expansions maps single tokens
    to single tokens and runs after tokenization.
    """

    lowercase: bool = True
    stopwords: frozenset = frozenset()
    ngram_merges: Mapping[str, str] = field(default_factory=dict)
    acronym_expansions: Mapping[str, str] = field(default_factory=dict)
    banned_terms: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        object.__setattr__(self, "banned_terms", frozenset(self.banned_terms))
        object.__setattr__(self, "ngram_merges", dict(self.ngram_merges))
        object.__setattr__(self, "acronym_expansions", dict(self.acronym_expansions))
        for phrase, token in self.ngram_merges.items():
            if re.search(r"\s", token):
                raise ValueError(f"merged token {token!r} must not contain whitespace")
            if not phrase.strip():
                raise ValueError("empty phrase in ngram_merges")
        for key, token in self.acronym_expansions.items():
            if re.search(r"\s", key) or re.search(r"\s", token):
                raise ValueError("acronym expansions must map single tokens to single tokens")


def _clean_text(text: str, config: PreprocessConfig) -> str:
    if config.lowercase:
        text = text.lower()
    for phrase, token in config.ngram_merges.items():
        pattern = r"\b" + r"\s+".join(re.escape(w) for w in phrase.split()) + r"\b"
        text = re.sub(pattern, token, text)
    text = _NON_TOKEN_RE.sub("", text)
    tokens = []
    for tok in text.split():
        # expand acronyms to a fixed point so a second pass is a no-op
        seen = 0
        while tok in config.acronym_expansions and seen <= len(config.acronym_expansions):
            tok = config.acronym_expansions[tok]
            seen += 1
        if not any(ch.isalpha() for ch in tok):
            continue  # bare numbers and leftover joiner debris
        if tok in config.stopwords or tok in config.banned_terms:
            continue
        tokens.append(tok)
    return " ".join(tokens)


def preprocess(docs, config: PreprocessConfig):
    """Clean a string, a Document, or an iterable of Documents."""
    if isinstance(docs, str):
        return _clean_text(docs, config)
    if isinstance(docs, Document):
        return Document(docs.id, _clean_text(docs.text, config), dict(docs.covariates))
    return [Document(d.id, _clean_text(d.text, config), dict(d.covariates)) for d in docs]


@dataclass(frozen=True)
class TermDocumentMatrix:
    """Sparse non-negative term-by-document matrix.

    Rows are vocabulary terms (lexicographic order when built here),
    columns are documents.  Entries must be non-negative and every row
    must have at least one non-zero; columns may be empty (a document
    whose words were all filtered out).
    """

    counts: sp.csr_matrix
    vocabulary: tuple
    doc_ids: tuple

    def __post_init__(self):
        counts = sp.csr_matrix(self.counts, dtype=float)
        counts.eliminate_zeros()
        if counts.shape != (len(self.vocabulary), len(self.doc_ids)):
            raise ValueError(
                f"counts shape {counts.shape} does not match "
                f"{len(self.vocabulary)} terms x {len(self.doc_ids)} documents"
            )
        if counts.nnz and counts.data.min() < 0:
            raise ValueError("counts must be non-negative")
        row_nnz = np.diff(counts.indptr)
        if np.any(row_nnz == 0):
            bad = int(np.argmin(row_nnz))
            raise ValueError(f"term {self.vocabulary[bad]!r} has no occurrences")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))

    @property
    def shape(self):
        return self.counts.shape

    def term_index(self, term: str) -> int:
        try:
            return self.vocabulary.index(term)
        except ValueError:
            raise KeyError(f"term {term!r} not in vocabulary") from None


def build_tdm(docs: Sequence[Document], min_term_count: int = 1) -> TermDocumentMatrix:
    """Count tokens of already-preprocessed documents into a sparse matrix.

    Terms whose total count across the corpus is below ``min_term_count``
    are dropped.  Raises if nothing survives.
    """
    if min_term_count < 1:
        raise ValueError("min_term_count must be >= 1")
    totals: dict[str, float] = {}
    doc_counts = []
    for doc in docs:
        counts: dict[str, int] = {}
        for tok in doc.text.split():
            counts[tok] = counts.get(tok, 0) + 1
        doc_counts.append(counts)
        for tok, c in counts.items():
            totals[tok] = totals.get(tok, 0) + c
    vocabulary = sorted(t for t, c in totals.items() if c >= min_term_count)
    if not vocabulary:
        raise ValueError("empty vocabulary: no term meets min_term_count")
    index = {t: i for i, t in enumerate(vocabulary)}
    rows, cols, vals = [], [], []
    for j, counts in enumerate(doc_counts):
        for tok, c in counts.items():
            i = index.get(tok)
            if i is not None:
                rows.append(i)
                cols.append(j)
                vals.append(float(c))
    counts = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(vocabulary), len(docs)), dtype=float
    )
    return TermDocumentMatrix(counts, tuple(vocabulary), tuple(d.id for d in docs))


@dataclass(frozen=True)
class DesignMatrix:
    """Dense document-by-covariate design with named columns."""

    Z: np.ndarray
    column_names: tuple
    doc_ids: tuple

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape != (len(self.doc_ids), len(self.column_names)):
            raise ValueError("design shape must be (n_documents, n_columns)")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))


def _covariate_values(docs, name):
    values = []
    for doc in docs:
        if name not in doc.covariates:
            raise ValueError(f"document {doc.id!r} is missing covariate {name!r}")
        values.append(doc.covariates[name])
    return values


def build_design(
    docs: Sequence[Document],
    covariates: Sequence[str],
    contrasts: str = "treatment",
    baselines: Mapping[str, str] | None = None,
) -> DesignMatrix:
    """Build an intercept-plus-covariates design matrix.

    Numeric covariates pass through as single columns.  String-valued
    covariates are coded by ``contrasts``:

    - ``"treatment"``: one indicator column per non-baseline level; the
      baseline is the lexicographically first level unless overridden.
    - ``"sum_to_zero"``: one column per retained level with the dropped
      level coded -1 everywhere; the dropped level is the
      lexicographically last unless overridden.
    """
    if contrasts not in ("treatment", "sum_to_zero"):
        raise ValueError(f"unknown contrast scheme {contrasts!r}")
    baselines = dict(baselines or {})
    columns = [np.ones(len(docs))]
    names = ["intercept"]
    for name in covariates:
        values = _covariate_values(docs, name)
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            columns.append(np.asarray(values, dtype=float))
            names.append(name)
            continue
        if not all(isinstance(v, str) for v in values):
            raise ValueError(f"covariate {name!r} mixes numeric and string values")
        levels = sorted(set(values))
        if len(levels) < 2:
            raise ValueError(f"covariate {name!r} has a single level {levels[0]!r}")
        if contrasts == "treatment":
            base = baselines.get(name, levels[0])
            if base not in levels:
                raise ValueError(f"baseline {base!r} is not a level of {name!r}")
            for lv in levels:
                if lv == base:
                    continue
                columns.append(np.asarray([1.0 if v == lv else 0.0 for v in values]))
                names.append(f"{name}[{lv}]")
        else:
            dropped = baselines.get(name, levels[-1])
            if dropped not in levels:
                raise ValueError(f"baseline {dropped!r} is not a level of {name!r}")
            for lv in levels:
                if lv == dropped:
                    continue
                col = np.asarray(
                    [1.0 if v == lv else (-1.0 if v == dropped else 0.0) for v in values]
                )
                columns.append(col)
                names.append(f"{name}[{lv}]")
    Z = np.column_stack(columns)
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise ValueError("design matrix is rank deficient")
    return DesignMatrix(Z, tuple(names), tuple(d.id for d in docs))


# ---------------------------------------------------------------------------
# file formats


def load_documents_jsonl(path) -> list[Document]:
    """One JSON object per line; `id` and `text` fields, the rest covariates."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({err})") from None
            if "id" not in record or "text" not in record:
                raise ValueError(f"{path}:{lineno}: record needs 'id' and 'text' fields")
            cov = {k: v for k, v in record.items() if k not in ("id", "text")}
            docs.append(Document(str(record["id"]), str(record["text"]), cov))
    return docs


def load_documents_csv(path) -> list[Document]:
    """CSV with `id` and `text` columns; remaining columns become covariates.

    Covariate cells that parse as floats are stored numeric.
    """
    docs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "text"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: CSV header needs 'id' and 'text' columns")
        for lineno, row in enumerate(reader, start=2):
            cov = {}
            for key, value in row.items():
                if key in ("id", "text") or key is None:
                    continue
                if value is None:
                    raise ValueError(f"{path}:{lineno}: short row")
                try:
                    cov[key] = float(value)
                except ValueError:
                    cov[key] = value
            docs.append(Document(str(row["id"]), str(row["text"]), cov))
    return docs


def save_tdm(tdm: TermDocumentMatrix, directory) -> None:
    """Write tdm.mtx (MatrixMarket) plus vocabulary.txt and doc_ids.txt."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mmwrite(str(directory / "tdm.mtx"), sp.coo_matrix(tdm.counts))
    (directory / "vocabulary.txt").write_text(
        "".join(t + "\n" for t in tdm.vocabulary), encoding="utf-8"
    )
    (directory / "doc_ids.txt").write_text(
        "".join(d + "\n" for d in tdm.doc_ids), encoding="utf-8"
    )


def load_tdm(directory) -> TermDocumentMatrix:
    directory = Path(directory)
    counts = sp.csr_matrix(mmread(str(directory / "tdm.mtx")))
    vocab = (directory / "vocabulary.txt").read_text(encoding="utf-8").splitlines()
    doc_ids = (directory / "doc_ids.txt").read_text(encoding="utf-8").splitlines()
    return TermDocumentMatrix(counts, tuple(vocab), tuple(doc_ids))
