import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm, truncnorm

from cfaug.dgp import (
    InterventionPolicy,
    all_binary_hypotheses,
    augmented_risk_exact,
    bayes_xstar_classifier,
    build_default_gaussian_dgp,
    counterfactual_distribution,
    default_toy,
    default_toy_tau,
    enumerate_and_evaluate,
    make_gaussian_dgp,
    pushforward_distribution,
    sample_correlated_table,
    sample_dataset,
)
from cfaug.metrics import (
    BoundReport,
    JointTable,
    McAccuracy,
    ZeroMarginalError,
    aug_bound,
    bayes_xstar_model,
    corruption_tv,
    gaussian_corruption_divergences,
    importance_divergence,
    lambda_aug_joint,
    lambda_aug_excess,
    merge_mc,
    mutual_information,
    normal_cdf,
    ood_accuracy_exact,
    ood_risk_mc,
    renyi_bound,
    renyi_dependence,
    truncated_xi_quadrature,
    tv_discrete,
    tv_gaussian_mc,
    tv_gaussian_shared_cov,
)
from cfaug.train import LinearModel

tables = st.integers(0, 2 ** 32 - 1).map(
    lambda s: np.random.default_rng(s).dirichlet(np.full(6, 0.7)).reshape(2, 3))


# --- dependence measures ---------------------------------------------------------

def test_mutual_information_hand_tables():
    assert mutual_information(JointTable(np.full((2, 2), 0.25))) == pytest.approx(0.0, abs=1e-15)
    diag = JointTable(np.array([[0.5, 0.0], [0.0, 0.5]]))
    assert mutual_information(diag) == pytest.approx(math.log(2), abs=1e-15)
    assert mutual_information(diag, base=2) == pytest.approx(1.0, abs=1e-15)
    p = np.array([[0.4, 0.1], [0.1, 0.4]])
    direct = 2 * 0.4 * math.log(0.4 / 0.25) + 2 * 0.1 * math.log(0.1 / 0.25)
    assert mutual_information(JointTable(p)) == pytest.approx(direct, abs=1e-15)


def test_renyi_hand_tables():
    indep = JointTable(np.outer([0.3, 0.7], [0.2, 0.5, 0.3]))
    assert renyi_dependence(indep, 2) == pytest.approx(1.0, abs=1e-14)
    assert renyi_dependence(indep, math.inf) == pytest.approx(1.0, abs=1e-14)
    diag = JointTable(np.array([[0.5, 0.0], [0.0, 0.5]]))
    assert renyi_dependence(diag, 2) == 2.0
    assert renyi_dependence(diag, math.inf) == 2.0
    p = np.array([[0.4, 0.1], [0.1, 0.4]])
    assert renyi_dependence(JointTable(p), 2) == pytest.approx(2 * 0.16 / 0.25 + 2 * 0.01 / 0.25, abs=1e-15)
    assert renyi_dependence(JointTable(p), math.inf) == pytest.approx(1.6, abs=1e-15)


def test_importance_divergence_hand_tables():
    indep = JointTable(np.outer([0.3, 0.7], [0.2, 0.5, 0.3]))
    assert importance_divergence(indep, 2) == pytest.approx(1.0, abs=1e-14)
    p = JointTable(np.array([[0.4, 0.1], [0.1, 0.4]]))
    assert importance_divergence(p, 2) == pytest.approx(2 * 0.0625 / 0.4 + 2 * 0.0625 / 0.1, abs=1e-15)
    assert importance_divergence(p, math.inf) == pytest.approx(2.5, abs=1e-15)
    assert importance_divergence(JointTable(np.array([[0.5, 0.0], [0.0, 0.5]])), math.inf) == math.inf


def test_renyi_ordering_on_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(100):
        jt = JointTable(rng.dirichlet(np.ones(8)).reshape(2, 4))
        assert renyi_dependence(jt, math.inf) >= renyi_dependence(jt, 2) >= 1 - 1e-12
        assert importance_divergence(jt, math.inf) >= importance_divergence(jt, 2) >= 1 - 1e-12


def test_joint_table_validation():
    with pytest.raises(ValueError):
        JointTable(np.array([[0.5, 0.6], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        JointTable(np.array([[1.2, -0.2], [0.0, 0.0]]))
    with pytest.raises(ZeroMarginalError):
        renyi_dependence(JointTable(np.array([[0.5, 0.0], [0.5, 0.0]])), 2)


@settings(max_examples=100, deadline=None)
@given(p=tables)
def test_mi_bounds_property(p):
    jt = JointTable(p)
    mi = mutual_information(jt)
    assert -1e-12 <= mi <= math.log(2) + 1e-12
    assert mutual_information(JointTable(jt.product)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(p=tables)
def test_renyi_property(p):
    jt = JointTable(p)
    d2, dinf = renyi_dependence(jt, 2), renyi_dependence(jt, math.inf)
    assert dinf >= d2 - 1e-12 and d2 >= 1 - 1e-12
    assert renyi_dependence(JointTable(jt.product), 2) == pytest.approx(1.0, abs=1e-12)


# --- divergences -------------------------------------------------------------------

def test_normal_cdf_precision():
    x = np.linspace(-8, 8, 101)
    np.testing.assert_allclose(normal_cdf(x), norm.cdf(x), atol=1e-12, rtol=0)


def test_tv_gaussian_examples():
    assert tv_gaussian_shared_cov(0.0, 0.3) == 0.0
    assert tv_gaussian_shared_cov(0.2, 0.1) == pytest.approx(2 * norm.cdf(1) - 1, abs=1e-12)
    assert tv_gaussian_shared_cov(0.2, 0.1) == pytest.approx(0.68269, abs=1e-5)


@pytest.mark.parametrize("delta", [0.05, 0.2, 0.5])
def test_tv_gaussian_against_monte_carlo(delta):
    mc = tv_gaussian_mc(delta, 0.1, 1_000_000, np.random.default_rng(0))
    assert abs(mc - tv_gaussian_shared_cov(delta, 0.1)) < 0.01


def test_tv_discrete_examples():
    assert tv_discrete([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert tv_discrete([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert tv_discrete([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.4, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 8))
def test_tv_discrete_is_a_metric(seed, n):
    rng = np.random.default_rng(seed)
    p, q, r = rng.dirichlet(np.ones(n), size=3)
    assert tv_discrete(p, q) == pytest.approx(tv_discrete(q, p), abs=1e-12)
    assert tv_discrete(p, p) == 0.0
    assert tv_discrete(p, r) <= tv_discrete(p, q) + tv_discrete(q, r) + 1e-12


def test_truncated_xi_quadrature_moments():
    for lam in (0.2, 0.5, 0.95):
        xi, w = truncated_xi_quadrature(lam)
        dist = truncnorm(-lam / 0.1, (1 - lam) / 0.1, loc=lam, scale=0.1)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((xi > 0) & (xi <= 1))
        assert float(w @ xi) == pytest.approx(dist.mean(), abs=1e-8)


def test_deterministic_corruption_tv_closed_form():
    dgp = build_default_gaussian_dgp(0)
    mix = np.random.default_rng(0).dirichlet(np.ones(8))
    for lam in (0.2, 0.6):
        div = gaussian_corruption_divergences(dgp.mu_c, mix, dgp.sigma_spu, lam)
        for c in range(8):
            direct = sum(mix[k] * tv_gaussian_shared_cov((1 - lam) * np.linalg.norm(dgp.mu_c[c] - dgp.mu_c[k]),
                                                         dgp.sigma_spu) for k in range(8))
            assert div[c] == pytest.approx(direct, abs=1e-12)
    assert corruption_tv([0.0, 1.0], [1.0, 0.0], 0.2, 0.3) == 0.0


def test_exact_toy_augmentation_has_zero_divergence():
    toy = default_toy()
    for c, tau in enumerate(default_toy_tau()):
        assert tv_discrete(pushforward_distribution(toy, tau), counterfactual_distribution(toy, c)) <= 1e-15


# --- bounds ------------------------------------------------------------------------

def test_renyi_bound_arithmetic():
    jt = JointTable(np.outer([0.5, 0.5], [0.5, 0.5]))
    rep = renyi_bound(0.1, jt, 2, math.exp(-1))
    assert rep.terms["concentration"] == pytest.approx(1.0, abs=1e-15)
    assert rep.terms["dependence"] == pytest.approx(0.5, abs=1e-15)
    assert rep.total() == pytest.approx(1.6, abs=1e-15)
    p = JointTable(np.array([[0.4, 0.1], [0.1, 0.4]]))
    imp = renyi_bound(0.1, p, 100, 0.05)
    dep = renyi_bound(0.1, p, 100, 0.05, direction="dependence")
    assert imp.info["d2"] == pytest.approx(1.5625) and dep.info["d2"] == pytest.approx(1.36)
    assert imp.total() > dep.total()
    with pytest.raises(ValueError):
        renyi_bound(0.1, JointTable(np.array([[0.5, 0.0], [0.0, 0.5]])), 100, 0.05)


def test_renyi_bound_monotone():
    rng = np.random.default_rng(0)
    p_y = np.array([0.5, 0.5])
    mixes = np.linspace(0, 0.45, 10)
    totals = [renyi_bound(0.2, JointTable.from_conditional(p_y, [[0.5 + a, 0.5 - a], [0.5 - a, 0.5 + a]]),
                          100, 0.05).total() for a in mixes]
    assert np.all(np.diff(totals) > 0)
    jt = JointTable(rng.dirichlet(np.ones(4)).reshape(2, 2))
    by_n = [renyi_bound(0.2, jt, n, 0.05).total() for n in (10, 100, 1000, 10 ** 6)]
    assert np.all(np.diff(by_n) < 0) and by_n[-1] - 0.2 < 0.01


def test_aug_bound_examples():
    rep = aug_bound(0.1, np.zeros(4), 100, 0.05, 0.2, 0.2, 0.3)
    assert rep.total("excess") == pytest.approx(0.1 + math.sqrt(math.log(20) / 100), abs=1e-15)
    assert rep.total("joint") == pytest.approx(rep.total("excess") + 0.5, abs=1e-15)
    assert lambda_aug_excess(0.3, 0.2) == pytest.approx(0.1)
    assert lambda_aug_joint(0.3, 0.2) == pytest.approx(0.5)


def test_aug_bound_grows_as_lambda_falls():
    dgp = build_default_gaussian_dgp(0)
    mix = np.full(8, 1 / 8)
    totals = [aug_bound(0.1, gaussian_corruption_divergences(dgp.mu_c, mix, dgp.sigma_spu, lam, True),
                        600, 0.05, 0.05, 0.1, 0.05).total("excess") for lam in (0.9, 0.99, 0.999)]
    assert totals[0] > totals[1] > totals[2]


def test_bound_report_terms_and_serialization():
    rep = aug_bound(0.13, [0.1, 0.3], 50, 0.1, 0.05, 0.09, 0.07)
    for row in rep.rows():
        parts = [row[k] for k in ("empirical", "concentration", "divergence", "lambda_aug")]
        assert abs(row["total"] - sum(parts)) <= 1e-12
    assert rep.to_csv().splitlines()[0].startswith("bound,variant,n,delta")
    kv = dict(line.split("=") for line in rep.to_kv().splitlines())
    assert float(kv["excess.total"]) == rep.total("excess")
    with pytest.raises(ValueError):
        BoundReport("x", 1, 0.1, {"bad": -0.1})
    with pytest.raises(ValueError):
        BoundReport("x", 1, 0.1, {"bad": math.nan})
    with pytest.raises(ValueError):
        renyi_bound(0.1, JointTable(np.full((2, 2), 0.25)), 10, 1.5)


def test_aug_bound_holds_on_toy_with_exact_counterfactuals():
    toy = default_toy()
    perp = InterventionPolicy.uniform_c()
    hs = all_binary_hypotheses(8)
    r_perp = np.array([enumerate_and_evaluate(toy, h, perp) for h in hs])
    r_aug = np.array([augmented_risk_exact(toy, h) for h in hs])
    h_star = bayes_xstar_classifier(toy)
    r_star = enumerate_and_evaluate(toy, h_star, perp)
    r_aug_star = r_perp[np.argmin(r_aug)]
    for k in range(len(hs)):
        rep = aug_bound(r_aug[k], np.zeros(2), 100, 0.05, r_star, r_aug_star, augmented_risk_exact(toy, h_star))
        assert rep.total("excess") >= r_perp[k] - 1e-12


# --- OOD risk ----------------------------------------------------------------------

def test_noiseless_xstar_model_is_perfect():
    dgp = make_gaussian_dgp(np.random.default_rng(0), sigma=1e-4)
    acc = ood_risk_mc(bayes_xstar_model(dgp), dgp, 2000, np.random.default_rng(1))
    assert acc.accuracy == 1.0


def test_constant_model_scores_half():
    dgp = build_default_gaussian_dgp(0)
    model = LinearModel(np.zeros((1, dgp.dim)), np.array([1.0]), 2)
    acc = ood_risk_mc(model, dgp, 10_000, np.random.default_rng(0))
    assert abs(acc.accuracy - 0.5) <= 3 * math.sqrt(0.25 / 10_000)
    assert ood_accuracy_exact(model, dgp) == pytest.approx(0.5, abs=1e-15)


def test_exact_accuracy_matches_monte_carlo():
    dgp = build_default_gaussian_dgp(3)
    dgp = dgp.with_table(sample_correlated_table(dgp, [0.7, 0.8], np.random.default_rng(0), base=2))
    rng = np.random.default_rng(1)
    for _ in range(4):
        w = rng.normal(size=(1, dgp.dim)) * np.r_[np.full(10, 3.0), np.full(300, 0.01)]
        model = LinearModel(w, rng.normal(size=1) * 0.1, 2)
        for policy in (None, InterventionPolicy.keep_training()):
            mc = ood_risk_mc(model, dgp, 20_000, rng, policy)
            assert abs(mc.accuracy - ood_accuracy_exact(model, dgp, policy)) < 4 * mc.se + 1e-3


def test_xstar_bayes_model_beats_any_xstar_perturbation():
    dgp = build_default_gaussian_dgp(0)
    best = bayes_xstar_model(dgp)
    base = ood_accuracy_exact(best, dgp)
    rng = np.random.default_rng(0)
    for _ in range(10):
        W = best.W + rng.normal(size=best.W.shape) * np.r_[np.full(10, 5.0), np.zeros(300)]
        assert ood_accuracy_exact(LinearModel(W, best.b, 2), dgp) <= base + 1e-12


def test_merge_mc_is_order_independent():
    shards = [McAccuracy(0.8, 0.0, 100), McAccuracy(0.6, 0.0, 300), McAccuracy(0.9, 0.0, 50)]
    a, b = merge_mc(shards), merge_mc(shards[::-1])
    assert a.accuracy == pytest.approx(b.accuracy, abs=1e-15) and a.n == 450
    assert a.accuracy == pytest.approx((80 + 180 + 45) / 450, abs=1e-15)


def test_mc_sample_is_unconfounded():
    dgp = build_default_gaussian_dgp(0)
    dgp = dgp.with_table(sample_correlated_table(dgp, [0.8, 0.85], np.random.default_rng(0), base=2))
    ds = sample_dataset(dgp, 50_000, InterventionPolicy.uniform_c(), np.random.default_rng(0))
    assert mutual_information(JointTable.from_samples(ds.y, ds.c, 2, 8)) < 0.005
