import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import truncnorm

from cfaug.augment import (
    CounterfactualSet,
    CoverageGapError,
    MatchConfig,
    NoMatchError,
    build_augmented_dataset,
    corrupt_counterfactuals,
    diff_in_diff,
    match_examples,
    matched_counterfactuals,
    oracle_set,
    sample_xi,
    write_augmented_csv,
)
from cfaug.dgp import (
    Dataset,
    build_default_gaussian_dgp,
    make_gaussian_dgp,
    oracle_counterfactuals,
    sample_dataset,
    sample_panel_dataset,
)
from cfaug.train import LinearModel


@pytest.fixture(scope="module")
def dgp():
    return build_default_gaussian_dgp(0)


@pytest.fixture(scope="module")
def sample(dgp):
    return sample_dataset(dgp, 40, None, np.random.default_rng(0))


def test_deterministic_lambda_one_is_oracle(dgp, sample):
    cfs = corrupt_counterfactuals(dgp, sample, 1.0, mode="deterministic")
    assert np.array_equal(cfs.X, oracle_set(dgp, sample).X)


def test_xi_mean_matches_truncated_normal():
    lam, sd = 0.2, 0.1
    xi = sample_xi(np.random.default_rng(0), lam, 10_000)
    assert xi.min() > 0 and xi.max() <= 1
    a, b = (0 - lam) / sd, (1 - lam) / sd
    dist = truncnorm(a, b, loc=lam, scale=sd)
    assert abs(xi.mean() - lam) < 0.02
    assert abs(xi.mean() - dist.mean()) < 4 * dist.std() / math.sqrt(len(xi))


def test_originals_are_kept(dgp, sample):
    for mode in ("per_pair", "per_example", "deterministic"):
        cfs = corrupt_counterfactuals(dgp, sample, 0.3, np.random.default_rng(1), mode)
        own = cfs.X[np.arange(len(sample)), sample.c]
        assert own.tobytes() == sample.X.tobytes()
        assert np.all(cfs.kind[np.arange(len(sample)), sample.c] == "original")


def test_corruption_distance_is_linear_in_lambda(dgp, sample):
    truth = oracle_counterfactuals(dgp, sample)
    gaps = []
    for lam in (0.2, 0.5, 0.8):
        cfs = corrupt_counterfactuals(dgp, sample, lam, mode="deterministic")
        err = np.linalg.norm(cfs.X - truth, axis=2)
        shift = np.linalg.norm(dgp.mu_c[None, :, :] - dgp.mu_c[sample.c][:, None, :], axis=2)
        np.testing.assert_allclose(err, (1 - lam) * shift, atol=1e-9)
        gaps.append(err.sum())
    assert gaps[0] > gaps[1] > gaps[2]


def test_per_example_mode_shares_xi(dgp, sample):
    cfs = corrupt_counterfactuals(dgp, sample, 0.3, np.random.default_rng(0), "per_example")
    for i in range(len(sample)):
        row = cfs.xi[i][~np.isnan(cfs.xi[i])]
        assert np.all(row == row[0])
    per_pair = corrupt_counterfactuals(dgp, sample, 0.3, np.random.default_rng(0), "per_pair")
    assert len(np.unique(per_pair.xi[0][~np.isnan(per_pair.xi[0])])) > 1


def test_invalid_lambda(dgp, sample):
    for lam in (0.0, 1.5):
        with pytest.raises(ValueError):
            corrupt_counterfactuals(dgp, sample, lam, np.random.default_rng(0))


def test_diff_in_diff_recovers_truth(dgp):
    ds = sample_panel_dataset(dgp, 400, np.random.default_rng(1))
    cfs = diff_in_diff(ds, MatchConfig("exact_key"), on_missing="drop")
    c_pre = ds.m[:, 0].astype(int)
    checked = 0
    for i, c in zip(*np.nonzero(cfs.kind == "diff_in_diff")):
        truth = ds.x_pre[i].copy()
        truth[dgp.spurious_slice] += dgp.mu_c[c] - dgp.mu_c[c_pre[i]]
        np.testing.assert_allclose(cfs.X[i, c], truth, atol=1e-10)
        checked += 1
    assert checked > 0.5 * len(ds) * 7


def test_diff_in_diff_averaging_identical_deltas(dgp):
    ds = sample_panel_dataset(dgp, 400, np.random.default_rng(2))
    one = diff_in_diff(ds, MatchConfig("exact_key", k_neighbors=1), on_missing="drop")
    many = diff_in_diff(ds, MatchConfig("exact_key", k_neighbors=5), on_missing="drop")
    multi = [k for k, v in many.matches.items() if len(v) > 1]
    assert multi
    for i, c in multi:
        np.testing.assert_allclose(many.X[i, c], one.X[i, c], atol=1e-10)


def test_zero_caliper_without_exact_neighbor():
    X = np.zeros((2, 2))
    ds = Dataset(X=X, y=np.array([0, 1]), c=np.array([0, 1]), num_classes=2, num_attributes=2,
                 m=np.array([[0.0], [1.0]]), x_pre=X.copy())
    with pytest.raises(NoMatchError):
        diff_in_diff(ds, MatchConfig("euclidean_standardized", caliper=0.0))
    dropped = diff_in_diff(ds, MatchConfig("euclidean_standardized", caliper=0.0), on_missing="drop")
    assert (dropped.kind == "missing").sum() == 2


def test_match_exact_query_first():
    pool = np.array([[3.0, 1.0], [0.0, 0.0], [1.0, 2.0]])
    idx, dist = match_examples(pool[2], pool, MatchConfig("euclidean_standardized", k_neighbors=3),
                               return_distances=True)
    assert idx[0] == 2 and dist[0] == 0.0


def test_match_tie_goes_to_lower_index():
    pool = np.array([[1.0], [-1.0], [3.0]])
    idx = match_examples([0.0], pool, MatchConfig("euclidean_standardized", k_neighbors=2))
    assert list(idx) == [0, 1]


def test_match_order_against_brute_force():
    pool = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0], [1.0, 1.0]])
    query = np.array([0.9, 0.2])
    sd = pool.std(axis=0)
    d = [math.sqrt(sum(((query[k] - p[k]) / sd[k]) ** 2 for k in range(2))) for p in pool]
    expected = sorted(range(5), key=lambda j: (d[j], j))
    got = match_examples(query, pool, MatchConfig("euclidean_standardized", k_neighbors=5))
    assert list(got) == expected


def test_caliper_filters():
    pool = np.array([[0.0], [1.0], [10.0]])
    got = match_examples([0.0], pool, MatchConfig("euclidean_standardized", k_neighbors=3, caliper=0.5))
    assert list(got) == [0, 1]


def test_matched_counterfactuals_use_donors():
    X = np.arange(8.0).reshape(4, 2)
    ds = Dataset(X=X, y=np.array([0, 1, 0, 1]), c=np.array([0, 1, 0, 1]), num_classes=2,
                 num_attributes=2, m=np.array([[0.0], [0.0], [5.0], [5.0]]))
    cfs = matched_counterfactuals(ds, MatchConfig("exact_key"))
    np.testing.assert_array_equal(cfs.X[0, 1], X[1])
    np.testing.assert_array_equal(cfs.X[3, 0], X[2])
    assert cfs.provenance(0, 1) == "matched(1)"


def test_single_attribute_augmentation_is_identity():
    dgp = make_gaussian_dgp(np.random.default_rng(0), num_attributes=1, d_spu=5)
    ds = sample_dataset(dgp, 12, None, np.random.default_rng(1))
    aug = build_augmented_dataset(ds, oracle_set(dgp, ds)).data
    assert np.array_equal(aug.X, ds.X) and np.array_equal(aug.y, ds.y)


def test_augmented_counts_and_provenance(dgp):
    ds = sample_dataset(dgp, 3, None, np.random.default_rng(0))
    aug = build_augmented_dataset(ds, corrupt_counterfactuals(dgp, ds, 0.2, np.random.default_rng(0)))
    assert len(aug) == 24
    assert sum(p == "original" for p in aug.provenance) == 3
    assert all(p.startswith("corrupted(lambda=0.2;xi=") for p in aug.provenance if p != "original")
    assert np.array_equal(aug.source_idx, np.repeat(np.arange(3), 8))


def test_augmented_risk_matches_direct_sum(dgp, sample):
    cfs = corrupt_counterfactuals(dgp, sample, 0.3, np.random.default_rng(2))
    aug = build_augmented_dataset(sample, cfs).data
    rng = np.random.default_rng(3)
    for _ in range(5):
        h = LinearModel(rng.normal(size=(1, dgp.dim)), rng.normal(size=1), 2)
        pooled = np.mean(h.predict(aug.X) != aug.y)
        total = 0.0
        for i in range(len(sample)):
            for c in range(dgp.num_attributes):
                total += float(h.predict(cfs.X[i, c][None, :])[0] != sample.y[i])
        assert abs(pooled - total / (len(sample) * dgp.num_attributes)) <= 1e-15


def test_coverage_gap_detected(dgp):
    ds = sample_panel_dataset(dgp, 20, np.random.default_rng(0))
    cfs = diff_in_diff(ds, MatchConfig("exact_key"), on_missing="drop")
    if (cfs.kind == "missing").any():
        with pytest.raises(CoverageGapError):
            build_augmented_dataset(ds, cfs)
    other = sample_dataset(dgp, 20, None, np.random.default_rng(9))
    with pytest.raises(CoverageGapError):
        build_augmented_dataset(other, oracle_set(dgp, ds))


def test_augmented_csv_columns(dgp, tmp_path):
    ds = sample_dataset(dgp, 2, None, np.random.default_rng(0))
    aug = build_augmented_dataset(ds, oracle_set(dgp, ds))
    write_augmented_csv(aug, tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0].endswith("source_idx,c_target,provenance")
    assert len(lines) == 17


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 15), lam=st.floats(0.05, 1.0))
def test_every_source_yields_k_records(seed, n, lam):
    dgp = make_gaussian_dgp(np.random.default_rng(seed), num_attributes=4, d_spu=6)
    ds = sample_dataset(dgp, n, None, np.random.default_rng(seed + 1))
    aug = build_augmented_dataset(ds, corrupt_counterfactuals(dgp, ds, lam, np.random.default_rng(seed)))
    assert np.array_equal(np.bincount(aug.source_idx, minlength=n), np.full(n, 4))
    for i in range(n):
        rows = aug.source_idx == i
        assert sorted(aug.c_target[rows]) == [0, 1, 2, 3]
        assert np.all(aug.data.y[rows] == ds.y[i])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), lam=st.floats(0.01, 1.0), sd=st.floats(0.01, 0.5))
def test_xi_stays_in_unit_interval(seed, lam, sd):
    xi = sample_xi(np.random.default_rng(seed), lam, 200, sd)
    assert np.all((xi > 0) & (xi <= 1))


def test_counterfactual_set_shape_check():
    with pytest.raises(ValueError):
        CounterfactualSet(np.zeros((2, 3, 4)), np.zeros(2, dtype=int), np.full((2, 2), "x", dtype=object))
