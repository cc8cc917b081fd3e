"""Covariate-effect inference on topic prevalence.

Two routes are provided.  The nonparametric one resamples documents with
replacement, row-normalizes the anchor rows of each resample and refits
ordinary least squares, yielding percentile intervals; the topic-document
matrix never has to be recomputed because row normalization cancels the
per-topic rescaling exactly.  The parametric one models per-document
topic shares with a beta likelihood in its mean-precision form,

    mean      mu_j    = expit(z_j' B_mean)
    precision sigma_j = h(z_j' B_prec),  h = exp (default) or expit,

fitted by Fisher scoring with step-halving.  Standard errors come from
the inverse observed information at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .anchors import AnchorSet
from .corpus import DesignMatrix, TermDocumentMatrix
from .factorize import TopicModel
from .special import digamma, log_gamma, trigamma

__all__ = [
    "MODE_TOPIC",
    "MODE_DOCUMENT",
    "NormalizedPrevalence",
    "BootstrapResult",
    "BetaFit",
    "normalize_prevalence",
    "ols_fit",
    "bootstrap_effects",
    "beta_fit",
    "predict_beta",
    "wald_summary",
]

MODE_TOPIC = "topic"  # each topic's row sums to one across documents
MODE_DOCUMENT = "document"  # each document's column sums to one across topics

_REDRAW_CAP = 1000


def _expit(eta):
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass(frozen=True)
class NormalizedPrevalence:
    """Topic-by-document share matrix with its normalization mode.

    In document mode an all-zero column (a document none of whose topic
    weights are positive) is left at zero and its index recorded.
    """

    values: np.ndarray
    mode: str
    zero_columns: tuple = ()
    topic_labels: tuple | None = None
    doc_ids: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "zero_columns", tuple(self.zero_columns))


def normalize_prevalence(source, mode: str = MODE_TOPIC) -> NormalizedPrevalence:
    """Normalize a fitted model's theta, or any non-negative matrix.

    Row (topic) mode divides each topic's row by its total across
    documents and refuses all-zero rows; document mode divides each
    column by its total, flagging empty documents instead of failing.
    """
    labels = doc_ids = None
    if isinstance(source, TopicModel):
        M = source.theta
        labels, doc_ids = source.anchor_terms, source.doc_ids
    else:
        M = np.asarray(source, dtype=float)
    if M.ndim != 2:
        raise ValueError("prevalence source must be a 2-D matrix")
    if M.size and M.min() < 0:
        raise ValueError("prevalence source must be non-negative")

    if mode == MODE_TOPIC:
        sums = M.sum(axis=1)
        if np.any(sums == 0.0):
            i = int(np.argmin(sums))
            name = labels[i] if labels else f"row {i}"
            raise ValueError(f"topic {name!r} has zero total prevalence")
        values = M / sums[:, None]
        zero_cols = ()
    elif mode == MODE_DOCUMENT:
        sums = M.sum(axis=0)
        zero_cols = tuple(int(j) for j in np.flatnonzero(sums == 0.0))
        values = M / np.where(sums > 0.0, sums, 1.0)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return NormalizedPrevalence(values, mode, zero_cols, labels, doc_ids)


def _design_array(design):
    if isinstance(design, DesignMatrix):
        return design.Z, design.column_names
    Z = np.asarray(design, dtype=float)
    return Z, tuple(f"b{i}" for i in range(Z.shape[1]))


def _prevalence_values(prevalence):
    if isinstance(prevalence, NormalizedPrevalence):
        return prevalence.values
    return np.asarray(prevalence, dtype=float)


def ols_fit(prevalence, design) -> np.ndarray:
    """Least-squares coefficients, one column per topic.

    Solves ``min_B ||prevalence' - Z B||`` and returns B with shape
    (n_coefficients, n_topics).  The design must have full column rank.
    """
    values = _prevalence_values(prevalence)
    Z, _ = _design_array(design)
    if Z.shape[0] != values.shape[1]:
        raise ValueError("design rows must match prevalence columns")
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise ValueError("design matrix is rank deficient")
    B, *_ = np.linalg.lstsq(Z, values.T, rcond=None)
    return B


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimate plus percentile intervals over bootstrap draws."""

    point_estimate: np.ndarray  # (P, T)
    draws: np.ndarray  # (n_boot, P, T)
    lower: np.ndarray | None
    upper: np.ndarray | None
    alpha: float
    seed: int
    n_resampled: int
    coefficient_names: tuple
    topic_labels: tuple | None = None


def bootstrap_effects(
    tdm: TermDocumentMatrix,
    anchors: AnchorSet,
    design,
    n_boot: int = 2000,
    alpha: float = 0.05,
    seed: int = 0,
) -> BootstrapResult:
    """Percentile bootstrap for OLS effects on row-normalized anchor rows.

    Each iteration draws documents (columns, with matching design rows)
    with replacement and derives its randomness from ``(seed, iteration)``,
    so results do not depend on evaluation order.  An iteration whose
    resample zeroes out an anchor row is redrawn; if more than 10% of
    iterations needed a redraw the anchor is too sparse and this raises.
    """
    X = tdm.counts
    idx = list(anchors.indices)
    block = X[idx].toarray() if sp.issparse(X) else np.asarray(X, dtype=float)[idx]
    Z, names = _design_array(design)
    D = block.shape[1]
    if Z.shape[0] != D:
        raise ValueError("design rows must match document count")
    labels = tuple(tdm.vocabulary[i] for i in idx)

    normalized = normalize_prevalence(block, MODE_TOPIC)
    point = ols_fit(normalized, Z)

    P, T = point.shape
    draws = np.empty((n_boot, P, T))
    n_resampled = 0
    limit = 0.1 * n_boot
    for i in range(n_boot):
        rng = np.random.default_rng([seed, i])
        redraws = 0
        while True:
            sample = rng.integers(0, D, size=D)
            sub = block[:, sample]
            row_sums = sub.sum(axis=1)
            if np.all(row_sums > 0.0):
                break
            redraws += 1
            if redraws >= _REDRAW_CAP:
                raise ValueError(
                    f"anchor {labels[int(np.argmin(row_sums))]!r} is too sparse: "
                    f"iteration {i} cannot draw a usable resample"
                )
        if redraws:
            n_resampled += 1
            if n_resampled > limit:
                raise ValueError(
                    f"more than 10% of bootstrap iterations ({n_resampled}/{n_boot}) "
                    "needed redraws; anchor rows are too sparse"
                )
        Zs = Z[sample]
        Ys = (sub / row_sums[:, None]).T
        try:
            draws[i] = np.linalg.solve(Zs.T @ Zs, Zs.T @ Ys)
        except np.linalg.LinAlgError:
            draws[i] = np.linalg.lstsq(Zs, Ys, rcond=None)[0]

    if n_boot:
        lower = np.percentile(draws, 100.0 * (alpha / 2.0), axis=0)
        upper = np.percentile(draws, 100.0 * (1.0 - alpha / 2.0), axis=0)
    else:
        lower = upper = None
    return BootstrapResult(
        point_estimate=point,
        draws=draws,
        lower=lower,
        upper=upper,
        alpha=alpha,
        seed=seed,
        n_resampled=n_resampled,
        coefficient_names=names,
        topic_labels=labels,
    )


# ---------------------------------------------------------------------------
# beta regression


@dataclass(frozen=True)
class BetaFit:
    """Beta regression fit for one topic's per-document share."""

    topic: int | None
    mean_coefficients: np.ndarray
    precision_coefficients: np.ndarray
    mean_se: np.ndarray
    precision_se: np.ndarray
    log_likelihood: float
    converged: bool
    n_iter: int
    precision_link: str
    mean_names: tuple
    precision_names: tuple
    loglik_history: tuple
    n_observations: int


def _link_precision(eta, link):
    if link == "log":
        return np.exp(np.clip(eta, -30.0, 30.0))
    return np.clip(_expit(eta), 1e-12, 1.0 - 1e-12)


def _precision_slope(phi, link):
    # d phi / d eta for the precision linear predictor
    return phi if link == "log" else phi * (1.0 - phi)


def _beta_loglik(y, mu, phi):
    a = mu * phi
    b = (1.0 - mu) * phi
    return float(
        np.sum(
            log_gamma(phi)
            - log_gamma(a)
            - log_gamma(b)
            + (a - 1.0) * np.log(y)
            + (b - 1.0) * np.log1p(-y)
        )
    )


def _beta_score(y, Zm, Zp, mu, phi, link):
    a = mu * phi
    b = (1.0 - mu) * phi
    ystar = _logit(y)
    mustar = digamma(a) - digamma(b)
    r = ystar - mustar
    t1 = mu * (1.0 - mu)
    s_mean = Zm.T @ (phi * r * t1)
    dldphi = mu * r + np.log1p(-y) - digamma(b) + digamma(phi)
    s_prec = Zp.T @ (dldphi * _precision_slope(phi, link))
    return np.concatenate([s_mean, s_prec])


def _beta_expected_info(Zm, Zp, mu, phi, link):
    a = mu * phi
    b = (1.0 - mu) * phi
    ta, tb, tp = trigamma(a), trigamma(b), trigamma(phi)
    t1 = mu * (1.0 - mu)
    t2 = _precision_slope(phi, link)
    w_mm = (phi**2) * (ta + tb) * t1**2
    w_mp = phi * (mu * ta - (1.0 - mu) * tb) * t1 * t2
    w_pp = (mu**2 * ta + (1.0 - mu) ** 2 * tb - tp) * t2**2
    upper = np.hstack([Zm.T @ (w_mm[:, None] * Zm), Zm.T @ (w_mp[:, None] * Zp)])
    lower = np.hstack([(Zm.T @ (w_mp[:, None] * Zp)).T, Zp.T @ (w_pp[:, None] * Zp)])
    return np.vstack([upper, lower])


def _unpack(theta, P):
    return theta[:P], theta[P:]


def _eval_ll(theta, y, Zm, Zp, link):
    bm, bp = _unpack(theta, Zm.shape[1])
    mu = np.clip(_expit(Zm @ bm), 1e-12, 1.0 - 1e-12)
    phi = _link_precision(Zp @ bp, link)
    return _beta_loglik(y, mu, phi), mu, phi


def beta_fit(
    prevalence,
    design_mean,
    design_precision=None,
    topic: int | None = None,
    precision_link: str = "log",
    boundary: str = "squeeze",
    drop_zero_columns: bool = False,
    max_iter: int = 200,
    tol_score: float = 1e-6,
) -> BetaFit:
    """Fit a beta regression to one topic's per-document share.

    ``prevalence`` is a document-mode :class:`NormalizedPrevalence` (with
    ``topic`` selecting the response row) or a raw response vector in
    [0, 1].  Exact zeros and ones are pulled inside the open interval by
    ``y -> (y (n - 1) + 0.5) / n`` when ``boundary="squeeze"``; with
    ``boundary="none"`` they raise.  ``drop_zero_columns`` instead drops
    documents flagged as all-zero during normalization.
    """
    if precision_link not in ("log", "logit"):
        raise ValueError(f"unknown precision link {precision_link!r}")
    if boundary not in ("squeeze", "none"):
        raise ValueError(f"unknown boundary policy {boundary!r}")

    drop: tuple = ()
    if isinstance(prevalence, NormalizedPrevalence):
        if prevalence.mode != MODE_DOCUMENT:
            raise ValueError("beta regression needs document-mode prevalence")
        if topic is None:
            raise ValueError("topic index is required with a prevalence matrix")
        y = prevalence.values[topic].copy()
        if drop_zero_columns:
            drop = prevalence.zero_columns
    else:
        y = np.asarray(prevalence, dtype=float).copy()
        if y.ndim != 1:
            raise ValueError("response must be a vector")

    Zm, mean_names = _design_array(design_mean)
    if design_precision is None:
        Zp, prec_names = np.ones((y.size, 1)), ("intercept",)
    else:
        Zp, prec_names = _design_array(design_precision)

    if drop:
        keep = np.setdiff1d(np.arange(y.size), np.asarray(drop, dtype=int))
        y, Zm, Zp = y[keep], Zm[keep], Zp[keep]
    if y.size != Zm.shape[0] or y.size != Zp.shape[0]:
        raise ValueError("design rows must match the response length")
    if np.any((y < 0.0) | (y > 1.0)):
        raise ValueError("response values must lie in [0, 1]")

    n = y.size
    at_boundary = (y <= 0.0) | (y >= 1.0)
    if np.any(at_boundary):
        if boundary == "none":
            raise ValueError(
                f"{int(at_boundary.sum())} response values sit on the boundary; "
                "enable squeezing or drop the offending documents"
            )
        y = (y * (n - 1) + 0.5) / n

    P, Q = Zm.shape[1], Zp.shape[1]

    # start values: least squares on the link scale, method-of-moments precision
    eta0 = _logit(np.clip(y, 1e-6, 1.0 - 1e-6))
    bm0, *_ = np.linalg.lstsq(Zm, eta0, rcond=None)
    resid = eta0 - Zm @ bm0
    dof = max(n - P, 1)
    s2 = float(resid @ resid) / dof
    mu0 = np.clip(_expit(Zm @ bm0), 1e-6, 1.0 - 1e-6)
    var0 = np.maximum(s2 * (mu0 * (1.0 - mu0)) ** 2, 1e-12)
    phi_hat = float(np.mean(mu0 * (1.0 - mu0) / var0 - 1.0))
    bp0 = np.zeros(Q)
    if precision_link == "log":
        bp0[0] = math.log(min(max(phi_hat, 0.1), 1e4))
    else:
        bp0[0] = _logit(np.clip(np.asarray(phi_hat), 1e-3, 0.999))

    theta = np.concatenate([bm0, bp0])
    ll, mu, phi = _eval_ll(theta, y, Zm, Zp, precision_link)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        score = _beta_score(y, Zm, Zp, mu, phi, precision_link)
        if np.max(np.abs(score)) <= tol_score:
            converged = True
            break
        info = _beta_expected_info(Zm, Zp, mu, phi, precision_link)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, score, rcond=None)[0]
        # the Newton decrement bounds the attainable gain; once it drops
        # below the floating-point noise floor of the objective, stop
        decrement = 0.5 * float(score @ step)
        if 0.0 <= decrement <= 1e-13 * max(1.0, abs(ll)):
            converged = True
            break
        accepted = False
        for half in range(40):
            trial = theta + step / (2.0**half)
            ll_try, mu_try, phi_try = _eval_ll(trial, y, Zm, Zp, precision_link)
            if np.isfinite(ll_try) and ll_try > ll:
                theta, ll, mu, phi = trial, ll_try, mu_try, phi_try
                history.append(ll)
                accepted = True
                break
        if not accepted:
            converged = 0.0 <= decrement <= 1e-9 * max(1.0, abs(ll))
            break

    score = _beta_score(y, Zm, Zp, mu, phi, precision_link)
    if not converged and np.max(np.abs(score)) <= tol_score:
        converged = True

    se = np.full(P + Q, np.nan)
    if converged:
        observed = _observed_information(theta, y, Zm, Zp, precision_link)
        try:
            cov = np.linalg.inv(observed)
            diag = np.diag(cov)
            if np.all(diag > 0.0):
                se = np.sqrt(diag)
            else:
                converged = False
        except np.linalg.LinAlgError:
            converged = False

    bm, bp = _unpack(theta, P)
    return BetaFit(
        topic=topic,
        mean_coefficients=bm,
        precision_coefficients=bp,
        mean_se=se[:P],
        precision_se=se[P:],
        log_likelihood=ll,
        converged=converged,
        n_iter=it,
        precision_link=precision_link,
        mean_names=mean_names,
        precision_names=prec_names,
        loglik_history=tuple(history),
        n_observations=n,
    )


def _observed_information(theta, y, Zm, Zp, link):
    """Negative Hessian via central differences of the analytic score."""
    P = Zm.shape[1]
    k = theta.size
    H = np.empty((k, k))
    for j in range(k):
        h = 1e-5 * max(1.0, abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        _, mu_u, phi_u = _eval_ll(up, y, Zm, Zp, link)
        _, mu_d, phi_d = _eval_ll(down, y, Zm, Zp, link)
        s_u = _beta_score(y, Zm, Zp, mu_u, phi_u, link)
        s_d = _beta_score(y, Zm, Zp, mu_d, phi_d, link)
        H[:, j] = -(s_u - s_d) / (2.0 * h)
    return 0.5 * (H + H.T)


def wald_summary(fit: BetaFit, alpha: float = 0.05) -> list:
    """Per-coefficient Wald z-tests.

    The flag column is "" for p < alpha, "NS" otherwise, and None when
    the test is unavailable (non-finite standard error, e.g. a diverged
    precision estimate on degenerate data).
    """
    rows = []
    for block, names, coefs, ses in (
        ("mean", fit.mean_names, fit.mean_coefficients, fit.mean_se),
        ("precision", fit.precision_names, fit.precision_coefficients, fit.precision_se),
    ):
        for name, est, se in zip(names, coefs, ses):
            z = est / se if se > 0 else math.nan
            p = math.erfc(abs(z) / math.sqrt(2.0)) if math.isfinite(z) else math.nan
            rows.append(
                {
                    "block": block,
                    "coefficient": name,
                    "estimate": float(est),
                    "se": float(se),
                    "z": float(z),
                    "p_value": float(p),
                    "flag": (
                        ("" if p < alpha else "NS") if math.isfinite(p) else None
                    ),
                }
            )
    return rows


def predict_beta(fit: BetaFit, z, level: float = 0.95, z_precision=None):
    """Predicted mean share and central beta interval at covariate row(s) z.

    Returns (mean, lower, upper); arrays when ``z`` is a matrix.  The
    precision row defaults to all-ones for an intercept-only precision
    model, or to ``z`` itself when the shapes line up.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be inside (0, 1)")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    P = fit.mean_coefficients.size
    Q = fit.precision_coefficients.size
    if z.shape[1] != P:
        raise ValueError(f"expected {P} mean covariate(s) per row")
    if z_precision is None:
        if Q == 1:
            zp = np.ones((z.shape[0], 1))
        elif Q == P:
            zp = z
        else:
            raise ValueError("provide z_precision for a covariate-driven precision model")
    else:
        zp = np.atleast_2d(np.asarray(z_precision, dtype=float))
        if zp.shape != (z.shape[0], Q):
            raise ValueError(f"z_precision must have shape ({z.shape[0]}, {Q})")

    mu = np.clip(_expit(z @ fit.mean_coefficients), 1e-12, 1.0 - 1e-12)
    phi = _link_precision(zp @ fit.precision_coefficients, fit.precision_link)
    a = mu * phi
    b = (1.0 - mu) * phi
    lo = stats.beta.ppf((1.0 - level) / 2.0, a, b)
    hi = stats.beta.ppf((1.0 + level) / 2.0, a, b)
    if mu.size == 1:
        return float(mu[0]), float(lo[0]), float(hi[0])
    return mu, lo, hi
