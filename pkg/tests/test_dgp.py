import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfaug.dgp import (
    Dataset,
    DiscreteDgp,
    InterventionPolicy,
    TableSamplingError,
    all_binary_hypotheses,
    augmented_risk_exact,
    bayes_xstar_classifier,
    build_default_gaussian_dgp,
    default_toy,
    enumerate_and_evaluate,
    four_state_toy,
    oracle_counterfactual,
    random_toy,
    read_dataset_csv,
    sample_correlated_table,
    sample_dataset,
    sample_panel_dataset,
    sample_toy,
    select_dirichlet_alpha,
    write_dataset_csv,
)
from cfaug.metrics import JointTable, mutual_information


def random_policies(rng, L, K, n=20):
    return [InterventionPolicy.fixed(rng.dirichlet(np.ones(K), size=L)) for _ in range(n)]


# --- Gaussian DGP -------------------------------------------------------------

def test_default_gaussian_dgp_parameters():
    dgp = build_default_gaussian_dgp(0)
    assert (dgp.num_attributes, dgp.num_classes, dgp.d_star, dgp.d_spu) == (8, 2, 10, 300)
    assert dgp.sigma == pytest.approx(0.1)
    assert dgp.sigma_spu ** 2 == pytest.approx(0.05)
    np.testing.assert_allclose(np.linalg.norm(dgp.mu_c, axis=1), 60.0, atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(dgp.mu_y, axis=1), 1 / 3, atol=1e-9)
    np.testing.assert_allclose(dgp.p_y, [0.5, 0.5])
    np.testing.assert_allclose(dgp.p_c_given_y, 1 / 8)
    assert not np.allclose(dgp.mu_y[0], dgp.mu_y[1])


def test_default_gaussian_dgp_is_deterministic():
    a, b = build_default_gaussian_dgp(7), build_default_gaussian_dgp(7)
    assert np.array_equal(a.mu_y, b.mu_y) and np.array_equal(a.mu_c, b.mu_c)
    assert np.array_equal(a.aux_projection, b.aux_projection)


def test_invalid_tables_rejected():
    dgp = build_default_gaussian_dgp(0)
    with pytest.raises(ValueError):
        dgp.with_table(np.full((2, 8), 0.2))
    with pytest.raises(ValueError):
        InterventionPolicy.fixed([[0.5, 0.6], [0.5, 0.5]])


def test_zero_mi_interval_gives_equal_rows():
    dgp = build_default_gaussian_dgp(0)
    table = sample_correlated_table(dgp, [0.0, 1e-9], np.random.default_rng(0))
    np.testing.assert_allclose(table[0], table[1], atol=1e-4)


def test_table_lands_in_bits_interval():
    dgp = build_default_gaussian_dgp(1)
    rng = np.random.default_rng(3)
    for _ in range(5):
        table = sample_correlated_table(dgp, [0.7, 0.8], rng, base=2)
        mi = mutual_information(JointTable.from_conditional(dgp.p_y, table), base=2)
        assert 0.7 <= mi <= 0.8


def test_table_sampler_binary_nats_near_maximum():
    # I(Y;C) <= ln 2 for binary Y, so [0.65, 0.70] nats is feasible
    dgp = build_default_gaussian_dgp(0)
    dgp2 = type(dgp)(**{**dgp.__dict__, "num_attributes": 2, "mu_c": dgp.mu_c[:2],
                        "p_c_given_y": np.full((2, 2), 0.5)})
    table = sample_correlated_table(dgp2, [0.65, 0.70], np.random.default_rng(0))
    mi = mutual_information(JointTable.from_conditional(dgp2.p_y, table))
    assert 0.65 <= mi <= min(0.70, math.log(2))


def test_table_sampler_rejects_infeasible_interval():
    dgp = build_default_gaussian_dgp(0)
    with pytest.raises((TableSamplingError, ValueError)):
        sample_correlated_table(dgp, [0.70, 0.80], np.random.default_rng(0))  # nats > ln 2


def test_flat_alpha_rule():
    p_y = np.array([0.5, 0.5])
    assert select_dirichlet_alpha(p_y, 8, [0.7, 0.8], base=2) == 1.0
    assert select_dirichlet_alpha(p_y, 8, [0.85, 0.9], base=2) < 1.0
    assert select_dirichlet_alpha(p_y, 8, [0.7, 0.8], base=2, rule="median") < 1.0


def test_uniform_c_policy_breaks_dependence():
    dgp = build_default_gaussian_dgp(0)
    dgp = dgp.with_table(sample_correlated_table(dgp, [0.7, 0.8], np.random.default_rng(0), base=2))
    ds = sample_dataset(dgp, 100_000, InterventionPolicy.uniform_c(), np.random.default_rng(1))
    jt = JointTable.from_samples(ds.y, ds.c, 2, 8)
    np.testing.assert_allclose(jt.p_c, 1 / 8, atol=0.01)
    assert mutual_information(jt) < 0.005


def test_do_c_policy():
    dgp = build_default_gaussian_dgp(0)
    ds = sample_dataset(dgp, 500, InterventionPolicy.do_c(3), np.random.default_rng(0))
    assert np.all(ds.c == 3)


def test_training_sample_mi_matches_table():
    dgp = build_default_gaussian_dgp(2)
    dgp = dgp.with_table(sample_correlated_table(dgp, [0.7, 0.8], np.random.default_rng(2), base=2))
    ds = sample_dataset(dgp, 100_000, None, np.random.default_rng(5))
    truth = mutual_information(JointTable(dgp.joint_table()))
    plug_in = mutual_information(JointTable.from_samples(ds.y, ds.c, 2, 8))
    assert abs(truth - plug_in) < 0.02


def test_sampling_is_deterministic():
    dgp = build_default_gaussian_dgp(0)
    a = sample_dataset(dgp, 50, None, np.random.default_rng(9))
    b = sample_dataset(dgp, 50, None, np.random.default_rng(9))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.c, b.c)


def test_panel_constant_effect():
    dgp = build_default_gaussian_dgp(0)
    ds = sample_panel_dataset(dgp, 1000, np.random.default_rng(0))
    c_pre = ds.m[:, 0].astype(int)
    diff = ds.X - ds.x_pre
    same = ds.c == c_pre
    assert np.array_equal(ds.X[same], ds.x_pre[same])
    for i in range(len(ds)):
        expected = np.zeros(dgp.dim)
        expected[dgp.spurious_slice] = dgp.mu_c[ds.c[i]] - dgp.mu_c[c_pre[i]]
        np.testing.assert_allclose(diff[i], expected, atol=1e-12)


def test_oracle_counterfactual_round_trip():
    dgp = build_default_gaussian_dgp(0)
    ds = sample_dataset(dgp, 20, None, np.random.default_rng(0))
    for ex in ds:
        assert np.array_equal(oracle_counterfactual(dgp, ex, ex.c), ex.x)
        other = (ex.c + 3) % 8
        moved = oracle_counterfactual(dgp, ex, other)
        back = oracle_counterfactual(dgp, type(ex)(moved, ex.y, other), ex.c)
        np.testing.assert_allclose(back, ex.x, atol=1e-12)


def test_oracle_counterfactuals_match_intervention():
    dgp = build_default_gaussian_dgp(0)
    dgp = dgp.with_table(sample_correlated_table(dgp, [0.7, 0.8], np.random.default_rng(0), base=2))
    ds = sample_dataset(dgp, 10_000, None, np.random.default_rng(1))
    target = 5
    moved = np.array([oracle_counterfactual(dgp, ex, target) for ex in ds])
    ref = sample_dataset(dgp, 10_000, InterventionPolicy.do_c(target), np.random.default_rng(2))
    spu = dgp.spurious_slice
    # block means within 5 standard errors of the truth, spreads equal
    se = dgp.sigma_spu / math.sqrt(len(ds))
    assert np.max(np.abs(moved[:, spu].mean(axis=0) - dgp.mu_c[target])) < 5 * se
    assert abs(moved[:, spu].std() - ref.X[:, spu].std()) < 0.005


def test_dataset_csv_round_trip(tmp_path):
    dgp = build_default_gaussian_dgp(0)
    ds = sample_panel_dataset(dgp, 5, np.random.default_rng(0))
    write_dataset_csv(ds, tmp_path / "d.csv")
    back = read_dataset_csv(tmp_path / "d.csv", 2, 8)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.x_pre, ds.x_pre)
    assert np.array_equal(back.m, ds.m) and np.array_equal(back.y, ds.y)


def test_dataset_rejects_bad_labels():
    with pytest.raises(ValueError):
        Dataset(X=np.zeros((2, 3)), y=np.array([0, 2]), c=np.array([0, 0]),
                num_classes=2, num_attributes=1)


# --- discrete toy ---------------------------------------------------------------

def test_constant_hypothesis_risk():
    toy = default_toy()
    for label in (0, 1):
        risk = enumerate_and_evaluate(toy, np.full(8, label))
        assert risk == pytest.approx(1 - toy.p_y[label], abs=1e-15)


def test_invariance_of_xstar_hypotheses():
    rng = np.random.default_rng(0)
    for toy in (default_toy(), random_toy(rng)):
        L, S, K, Mv, Xn = toy.shape
        for g in all_binary_hypotheses(S):
            h = g[toy.extractor]
            base = enumerate_and_evaluate(toy, h)
            for pol in random_policies(rng, L, K) + [InterventionPolicy.uniform_c()]:
                assert abs(enumerate_and_evaluate(toy, h, pol) - base) <= 1e-14


def test_bayes_xstar_is_minimax_on_four_state_toy():
    toy = four_state_toy()
    grid = [InterventionPolicy.fixed([[a, 1 - a], [b, 1 - b]])
            for a in np.linspace(0, 1, 11) for b in np.linspace(0, 1, 11)]
    worst = [max(enumerate_and_evaluate(toy, h, p) for p in grid) for h in all_binary_hypotheses(4)]
    bayes = bayes_xstar_classifier(toy)
    assert max(enumerate_and_evaluate(toy, bayes, p) for p in grid) == pytest.approx(min(worst), abs=1e-14)


def test_augmented_risk_equals_unconfounded_risk():
    rng = np.random.default_rng(1)
    for toy in (default_toy(), random_toy(rng)):
        Xn = toy.shape[-1]
        for h in rng.integers(0, 2, size=(50, Xn)):
            exact = enumerate_and_evaluate(toy, h, InterventionPolicy.uniform_c())
            assert abs(augmented_risk_exact(toy, h) - exact) <= 1e-12


def test_toy_sample_counterfactuals_are_consistent():
    toy = default_toy()
    s = sample_toy(toy, 200, np.random.default_rng(0))
    assert np.array_equal(s.x_cf[np.arange(200), s.c], s.x)
    assert np.array_equal(toy.extractor[s.x_cf], np.repeat(s.x_star[:, None], 2, axis=1))


def test_discrete_rejects_extractor_off_support():
    toy = default_toy()
    with pytest.raises(ValueError):
        DiscreteDgp(toy.p_y, toy.p_xstar_given_y, toy.p_c_given_y, toy.p_x_given,
                    extractor=np.zeros(8, dtype=int))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), K=st.integers(2, 4), S=st.integers(1, 2))
def test_invariance_property(seed, K, S):
    rng = np.random.default_rng(seed)
    toy = random_toy(rng, S=S, K=K, R=2)
    g = rng.integers(0, 2, S)
    h = g[toy.extractor]
    base = enumerate_and_evaluate(toy, h)
    for pol in random_policies(rng, 2, K, n=3):
        assert abs(enumerate_and_evaluate(toy, h, pol) - base) <= 1e-14


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 30))
def test_sampling_respects_label_ranges(seed, n):
    dgp = build_default_gaussian_dgp(seed % 1000)
    ds = sample_dataset(dgp, n, None, np.random.default_rng(seed))
    assert ds.X.shape == (n, 310)
    assert ds.y.max() < 2 and ds.c.max() < 8
