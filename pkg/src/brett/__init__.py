"""Anchor-word topic factorization with covariate-effect inference.

The pipeline: build a term-document matrix (:mod:`brett.corpus`), pick
anchor terms by pivoted projection (:mod:`brett.anchors`), recover the
word-topic and topic-document factors (:mod:`brett.factorize`), and relate
topic prevalence to document covariates by bootstrap OLS or beta regression
(:mod:`brett.regress`). :mod:`brett.simulate` measures effect recovery on
synthetic corpora, :mod:`brett.report` renders the delimited outputs, and
:mod:`brett.cli` drives everything from the command line.
"""

__version__ = "0.1.0"

from .anchors import AnchorSet, residual_norms, select_anchors
from .corpus import (
    DesignMatrix,
    Document,
    PreprocessConfig,
    TermDocumentMatrix,
    build_design,
    build_tdm,
    load_documents_csv,
    load_documents_jsonl,
    load_tdm,
    preprocess,
    save_tdm,
)
from .factorize import (
    FitReport,
    TopicModel,
    fit,
    load_model,
    rank_topics,
    save_model,
    top_words,
)
from .nnls import NnlsError, solve_nnls, solve_nnls_batch
from .regress import (
    MODE_DOCUMENT,
    MODE_TOPIC,
    BetaFit,
    BootstrapResult,
    NormalizedPrevalence,
    beta_fit,
    bootstrap_effects,
    normalize_prevalence,
    ols_fit,
    predict_beta,
    wald_summary,
)
from .simulate import (
    SimConfig,
    SimResult,
    estimate_effects,
    generate_tdm,
    make_config,
    make_true_phi,
    pseudo_ground_truth,
    run_study,
    write_mse_table_csv,
    write_results_csv,
)

__all__ = [
    "__version__",
    "MODE_DOCUMENT",
    "MODE_TOPIC",
    "AnchorSet",
    "BetaFit",
    "BootstrapResult",
    "DesignMatrix",
    "Document",
    "FitReport",
    "NnlsError",
    "NormalizedPrevalence",
    "PreprocessConfig",
    "SimConfig",
    "SimResult",
    "TermDocumentMatrix",
    "TopicModel",
    "beta_fit",
    "bootstrap_effects",
    "build_design",
    "build_tdm",
    "estimate_effects",
    "fit",
    "generate_tdm",
    "load_documents_csv",
    "load_documents_jsonl",
    "load_model",
    "load_tdm",
    "make_config",
    "make_true_phi",
    "normalize_prevalence",
    "ols_fit",
    "predict_beta",
    "preprocess",
    "pseudo_ground_truth",
    "rank_topics",
    "residual_norms",
    "run_study",
    "save_model",
    "save_tdm",
    "select_anchors",
    "solve_nnls",
    "solve_nnls_batch",
    "top_words",
    "wald_summary",
]
