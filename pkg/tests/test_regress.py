"""Prevalence normalization, OLS/bootstrap effects and beta regression."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from brett.anchors import AnchorSet, select_anchors
from brett.corpus import TermDocumentMatrix
from brett.factorize import fit
from brett.regress import (
    MODE_DOCUMENT,
    MODE_TOPIC,
    NormalizedPrevalence,
    beta_fit,
    bootstrap_effects,
    normalize_prevalence,
    ols_fit,
    predict_beta,
    wald_summary,
)
from brett.regress import _beta_score, _eval_ll, _expit
from synth import as_tdm, make_separable


class TestNormalize:
    def test_topic_mode_rows_sum_to_one(self):
        M = np.array([[1.0, 3.0], [2.0, 2.0]])
        out = normalize_prevalence(M, MODE_TOPIC)
        np.testing.assert_allclose(out.values, [[0.25, 0.75], [0.5, 0.5]])
        np.testing.assert_allclose(out.values.sum(axis=1), 1.0)

    def test_document_mode_columns_sum_to_one(self):
        M = np.array([[1.0, 0.0], [3.0, 0.0]])
        out = normalize_prevalence(M, MODE_DOCUMENT)
        np.testing.assert_allclose(out.values[:, 0], [0.25, 0.75])
        assert out.zero_columns == (1,)
        np.testing.assert_array_equal(out.values[:, 1], 0.0)

    def test_zero_row_is_an_error_naming_the_topic(self):
        rng = np.random.default_rng(0)
        tdm, *_ = make_separable(rng, 20, 2, 10)
        anchors = select_anchors(tdm, 2)
        model, _ = fit(tdm, anchors)
        theta = model.theta.copy()
        theta[1] = 0.0
        object.__setattr__(model, "theta", theta)
        with pytest.raises(ValueError, match=model.anchor_terms[1]):
            normalize_prevalence(model, MODE_TOPIC)

    def test_rejects_negative_and_bad_mode(self):
        with pytest.raises(ValueError, match="non-negative"):
            normalize_prevalence(np.array([[1.0, -1.0]]), MODE_TOPIC)
        with pytest.raises(ValueError, match="mode"):
            normalize_prevalence(np.ones((2, 2)), "diagonal")

    def test_values_lie_in_unit_interval(self):
        rng = np.random.default_rng(4)
        M = rng.uniform(0.0, 5.0, size=(6, 9))
        for mode in (MODE_TOPIC, MODE_DOCUMENT):
            vals = normalize_prevalence(M, mode).values
            assert vals.min() >= 0.0 and vals.max() <= 1.0


class TestOls:
    def test_two_group_sum_to_zero_means(self):
        # group coded +1 has mean 0.2, group coded -1 has mean 0.4
        y = np.array([[0.2, 0.2, 0.4, 0.4]])
        Z = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [1.0, -1.0]])
        B = ols_fit(y, Z)
        np.testing.assert_allclose(B[:, 0], [0.3, -0.1], atol=1e-12)

    def test_normal_equations_hold(self):
        rng = np.random.default_rng(1)
        values = normalize_prevalence(rng.uniform(0.1, 1.0, (4, 40)), MODE_TOPIC)
        Z = np.column_stack([np.ones(40), rng.normal(size=(40, 2))])
        B = ols_fit(values, Z)
        grad = Z.T @ (values.values.T - Z @ B)
        assert np.max(np.abs(grad)) <= 1e-8

    def test_rank_deficiency_rejected(self):
        y = np.ones((1, 5))
        Z = np.column_stack([np.ones(5), np.ones(5)])
        with pytest.raises(ValueError, match="rank deficient"):
            ols_fit(y, Z)


class TestLambdaCancellation:
    def test_theta_and_anchor_rows_give_same_coefficients(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            tdm, *_ = make_separable(rng, 40, 4, 35)
            anchors = select_anchors(tdm, 4)
            model, _ = fit(tdm, anchors)
            Z = np.column_stack([np.ones(35), rng.normal(size=35)])
            from_theta = ols_fit(normalize_prevalence(model.theta, MODE_TOPIC), Z)
            block = tdm.counts[list(anchors.indices)].toarray()
            from_block = ols_fit(normalize_prevalence(block, MODE_TOPIC), Z)
            np.testing.assert_allclose(from_theta, from_block, atol=1e-10)


def two_anchor_tdm(seed=0, D=40):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(5.0, size=(2, D)) + 1.0
    return TermDocumentMatrix(
        sp.csr_matrix(counts), ("alpha", "beta"), tuple(f"d{j}" for j in range(D))
    )


class TestBootstrap:
    def test_point_estimate_matches_full_data_ols(self):
        tdm = two_anchor_tdm()
        Z = np.column_stack([np.ones(40), np.arange(40.0)])
        res = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=10, seed=3)
        block = tdm.counts.toarray()
        expected = ols_fit(normalize_prevalence(block, MODE_TOPIC), Z)
        np.testing.assert_array_equal(res.point_estimate, expected)

    def test_same_seed_is_bitwise_identical(self):
        tdm = two_anchor_tdm(1)
        Z = np.column_stack([np.ones(40), np.repeat([1.0, -1.0], 20)])
        a = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=50, seed=11)
        b = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=50, seed=11)
        np.testing.assert_array_equal(a.draws, b.draws)
        np.testing.assert_array_equal(a.lower, b.lower)
        c = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=50, seed=12)
        assert not np.array_equal(a.draws, c.draws)

    def test_intervals_are_exact_percentiles_of_draws(self):
        tdm = two_anchor_tdm(2)
        Z = np.column_stack([np.ones(40), np.repeat([1.0, -1.0], 20)])
        res = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=200, alpha=0.1, seed=5)
        np.testing.assert_array_equal(res.lower, np.percentile(res.draws, 5.0, axis=0))
        np.testing.assert_array_equal(res.upper, np.percentile(res.draws, 95.0, axis=0))

    def test_zero_draws_returns_point_only(self):
        tdm = two_anchor_tdm(3)
        Z = np.ones((40, 1))
        res = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=0)
        assert res.draws.shape == (0, 1, 2)
        assert res.lower is None and res.upper is None

    def test_dense_anchors_never_need_redraws(self):
        tdm = two_anchor_tdm(4)
        Z = np.ones((40, 1))
        res = bootstrap_effects(tdm, AnchorSet((0, 1)), Z, n_boot=100, seed=0)
        assert res.n_resampled == 0

    def test_sparse_anchor_row_raises(self):
        counts = np.ones((2, 12))
        counts[1] = 0.0
        counts[1, 0] = 3.0  # one supporting document: ~37% of resamples miss it
        tdm = TermDocumentMatrix(
            sp.csr_matrix(counts), ("alpha", "beta"), tuple(f"d{j}" for j in range(12))
        )
        with pytest.raises(ValueError, match="redraws|too sparse"):
            bootstrap_effects(tdm, AnchorSet((0, 1)), np.ones((12, 1)), n_boot=400, seed=0)

    def test_labels_and_names_carried(self):
        tdm = two_anchor_tdm(5)
        from brett.corpus import DesignMatrix, Document, build_design

        docs = [Document(f"d{j}", "", {"x": float(j)}) for j in range(40)]
        design = build_design(docs, ["x"])
        res = bootstrap_effects(tdm, AnchorSet((0, 1)), design, n_boot=5)
        assert res.coefficient_names == ("intercept", "x")
        assert res.topic_labels == ("alpha", "beta")


class TestBetaFit:
    def test_intercept_only_recovery(self):
        rng = np.random.default_rng(2)
        y = rng.beta(0.5 * 10.0, 0.5 * 10.0, size=5000)
        f = beta_fit(y, np.ones((y.size, 1)))
        assert f.converged
        # true mean 0.5 maps to a zero intercept through the logistic link
        assert abs(f.mean_coefficients[0]) <= 3.0 * f.mean_se[0]
        assert math.exp(f.precision_coefficients[0]) == pytest.approx(10.0, rel=0.15)

    def test_covariate_recovery(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=1500)
        mu = _expit(np.asarray(0.4 + 0.9 * z))
        y = rng.beta(mu * 20.0, (1.0 - mu) * 20.0)
        Z = np.column_stack([np.ones(z.size), z])
        f = beta_fit(y, Z)
        assert f.converged
        assert f.mean_coefficients[1] == pytest.approx(0.9, abs=4.0 * f.mean_se[1])

    def test_logit_precision_link(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=3000)
        mu = _expit(np.asarray(0.2 + 0.5 * z))
        y = rng.beta(mu * 0.7, (1.0 - mu) * 0.7)
        y = np.clip(y, 1e-9, 1.0 - 1e-9)
        Z = np.column_stack([np.ones(z.size), z])
        f = beta_fit(y, Z, precision_link="logit")
        assert f.converged
        assert _expit(f.precision_coefficients[:1])[0] == pytest.approx(0.7, abs=0.1)

    def test_boundary_squeeze_and_error(self):
        y = np.array([0.0, 0.3, 0.6, 1.0, 0.5, 0.2, 0.8, 0.4])
        with pytest.raises(ValueError, match="boundary"):
            beta_fit(y, np.ones((8, 1)), boundary="none")
        f = beta_fit(y, np.ones((8, 1)))  # squeezed: (y*(n-1)+0.5)/n
        assert f.converged
        assert f.n_observations == 8

    def test_values_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            beta_fit(np.array([0.2, 1.4]), np.ones((2, 1)))

    def test_prevalence_input_and_drop_flag(self):
        rng = np.random.default_rng(5)
        M = rng.uniform(0.5, 2.0, size=(3, 30))
        M[:, 4] = 0.0
        prev = normalize_prevalence(M, MODE_DOCUMENT)
        Z = np.column_stack([np.ones(30), rng.normal(size=30)])
        dropped = beta_fit(prev, Z, topic=1, drop_zero_columns=True)
        assert dropped.n_observations == 29
        kept = beta_fit(prev, Z, topic=1)  # zero stays, gets squeezed
        assert kept.n_observations == 30
        with pytest.raises(ValueError, match="document-mode"):
            beta_fit(normalize_prevalence(M, MODE_TOPIC), Z, topic=0)
        with pytest.raises(ValueError, match="topic"):
            beta_fit(prev, Z)

    def test_history_is_monotone_and_se_positive(self):
        rng = np.random.default_rng(6)
        z = rng.normal(size=400)
        mu = _expit(np.asarray(0.1 + 0.4 * z))
        y = rng.beta(mu * 8.0, (1.0 - mu) * 8.0)
        Z = np.column_stack([np.ones(400), z])
        f = beta_fit(y, Z)
        hist = np.asarray(f.loglik_history)
        assert np.all(np.diff(hist) >= 0.0)
        assert f.converged
        assert np.all(f.mean_se > 0.0) and np.all(f.precision_se > 0.0)

    def test_score_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        n = 60
        Zm = np.column_stack([np.ones(n), rng.normal(size=n)])
        Zp = np.ones((n, 1))
        y = rng.beta(3.0, 2.0, size=n)
        for link in ("log", "logit"):
            for _ in range(10):
                theta = rng.normal(scale=0.5, size=3)
                _, mu, phi = _eval_ll(theta, y, Zm, Zp, link)
                score = _beta_score(y, Zm, Zp, mu, phi, link)
                fd = np.empty(3)
                for j in range(3):
                    h = 1e-6 * max(1.0, abs(theta[j]))
                    up, dn = theta.copy(), theta.copy()
                    up[j] += h
                    dn[j] -= h
                    fd[j] = (
                        _eval_ll(up, y, Zm, Zp, link)[0] - _eval_ll(dn, y, Zm, Zp, link)[0]
                    ) / (2.0 * h)
                np.testing.assert_allclose(score, fd, rtol=1e-6, atol=1e-8)

    def test_wald_summary_flags(self):
        rng = np.random.default_rng(8)
        z = rng.normal(size=800)
        mu = _expit(np.asarray(1.0 + 0.0 * z))  # no real slope
        y = rng.beta(mu * 12.0, (1.0 - mu) * 12.0)
        Z = np.column_stack([np.ones(800), z])
        rows = wald_summary(beta_fit(y, Z))
        by_name = {r["coefficient"]: r for r in rows if r["block"] == "mean"}
        assert by_name["b0"]["flag"] == ""  # strong intercept
        assert by_name["b1"]["flag"] == "NS"  # no slope in truth
        assert all(0.0 <= r["p_value"] <= 1.0 for r in rows)

    def test_wald_summary_on_degenerate_data_flags_nothing(self):
        # zero within-group variance: the precision estimate diverges, so
        # no Wald test exists -- flags must be None, not a spurious "NS"
        y = np.array([0.0625] * 4 + [0.9375] * 4)
        Z = np.column_stack([np.ones(8), np.repeat([0.0, 1.0], 4)])
        fit = beta_fit(y, Z)
        assert not fit.converged
        rows = wald_summary(fit)
        assert any(not np.isfinite(r["se"]) for r in rows)
        for r in rows:
            assert r["flag"] is None or np.isfinite(r["p_value"])


def beta_quantile_reference(q, a, b):
    """Quantile by quadrature of the density plus root bracketing.

    Shares no code with the distribution object used in the implementation.
    """
    from scipy.integrate import quad
    from scipy.optimize import brentq

    logc = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)

    def pdf(t):
        return math.exp(logc + (a - 1.0) * math.log(t) + (b - 1.0) * math.log1p(-t))

    def cdf(x):
        return quad(pdf, 0.0, x, limit=300)[0]

    return brentq(lambda x: cdf(x) - q, 1e-12, 1.0 - 1e-12, xtol=1e-13)


class TestPredict:
    def fitted(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=900)
        mu = _expit(np.asarray(0.3 + 0.6 * z))
        y = rng.beta(mu * 14.0, (1.0 - mu) * 14.0)
        Z = np.column_stack([np.ones(900), z])
        return beta_fit(y, Z)

    def test_interval_brackets_mean_and_orders(self):
        f = self.fitted()
        mean, lo, hi = predict_beta(f, [1.0, 0.5], level=0.9)
        assert lo < mean < hi
        _, lo2, hi2 = predict_beta(f, [1.0, 0.5], level=0.99)
        assert lo2 < lo and hi2 > hi  # wider at higher level

    def test_quantiles_match_quadrature_oracle(self):
        f = self.fitted()
        mean, lo, hi = predict_beta(f, [1.0, -0.3], level=0.95)
        phi = math.exp(f.precision_coefficients[0])
        a, b = mean * phi, (1.0 - mean) * phi
        assert lo == pytest.approx(beta_quantile_reference(0.025, a, b), abs=1e-8)
        assert hi == pytest.approx(beta_quantile_reference(0.975, a, b), abs=1e-8)

    def test_symmetric_case(self):
        rng = np.random.default_rng(10)
        y = rng.beta(9.0, 9.0, size=4000)
        f = beta_fit(y, np.ones((4000, 1)))
        mean, lo, hi = predict_beta(f, [1.0], level=0.95)
        assert mean == pytest.approx(0.5, abs=0.02)
        assert (mean - lo) == pytest.approx(hi - mean, abs=2e-2)

    def test_matrix_input_and_validation(self):
        f = self.fitted()
        means, lo, hi = predict_beta(f, [[1.0, -1.0], [1.0, 0.0], [1.0, 1.0]])
        assert means.shape == (3,)
        assert np.all(lo < means) and np.all(means < hi)
        assert np.all(np.diff(means) > 0)  # positive slope
        with pytest.raises(ValueError, match="level"):
            predict_beta(f, [1.0, 0.0], level=1.5)
        with pytest.raises(ValueError, match="covariate"):
            predict_beta(f, [1.0, 0.0, 3.0])
