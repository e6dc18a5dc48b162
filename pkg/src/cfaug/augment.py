"""Counterfactual estimates x̂_i(c) and the augmented training set built from them."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .dgp.data import Dataset, dataset_header, _fmt
from .dgp.gaussian import GaussianDgp, oracle_counterfactuals

XI_SD = 0.1
CORRUPTION_MODES = ("per_pair", "per_example", "deterministic")
METRICS = ("euclidean_standardized", "exact_key")


class NoMatchError(LookupError):
    def __init__(self, i: int, c: int):
        super().__init__(f"no match for example {i} at attribute {c}")
        self.i, self.c = i, c


class CoverageGapError(ValueError):
    pass


@dataclass
class CounterfactualSet:
    """K candidate vectors per source example, with provenance.

    ``kind[i, c]`` is one of original, oracle, corrupted, diff_in_diff,
    matched or missing. ``xi`` holds the corruption factor for corrupted
    entries and ``matches[(i, c)]`` the donor indices for matched ones.
    """

    X: np.ndarray                     # (n, K, d)
    source_c: np.ndarray              # (n,)
    kind: np.ndarray                  # (n, K) strings
    xi: Optional[np.ndarray] = None   # (n, K)
    lam: Optional[float] = None
    matches: dict = field(default_factory=dict)

    def __post_init__(self):
        n, K, _ = self.X.shape
        if self.kind.shape != (n, K) or self.source_c.shape != (n,):
            raise ValueError("provenance arrays do not match the counterfactual tensor")

    @property
    def num_attributes(self) -> int:
        return self.X.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.kind != "missing"

    def provenance(self, i: int, c: int) -> str:
        k = self.kind[i, c]
        if k == "corrupted":
            return f"corrupted(lambda={self.lam:g};xi={self.xi[i, c]:.6g})"
        if k in ("diff_in_diff", "matched"):
            return f"{k}({';'.join(str(j) for j in self.matches[(i, c)])})"
        return str(k)


def _with_originals(X: np.ndarray, ds: Dataset, kind_default: str) -> tuple[np.ndarray, np.ndarray]:
    n = len(ds)
    kind = np.full((n, X.shape[1]), kind_default, dtype=object)
    X[np.arange(n), ds.c] = ds.X
    kind[np.arange(n), ds.c] = "original"
    return X, kind


def oracle_set(dgp: GaussianDgp, ds: Dataset) -> CounterfactualSet:
    """Exact counterfactuals of the Gaussian study."""
    X, kind = _with_originals(oracle_counterfactuals(dgp, ds), ds, "oracle")
    return CounterfactualSet(X, ds.c.copy(), kind)


def sample_xi(rng: np.random.Generator, lam: float, size, sd: float = XI_SD) -> np.ndarray:
    """Draws from N(lam, sd^2) truncated to (0, 1], by rejection."""
    out = rng.normal(lam, sd, size)
    bad = (out <= 0) | (out > 1)
    while np.any(bad):
        out[bad] = rng.normal(lam, sd, int(bad.sum()))
        bad = (out <= 0) | (out > 1)
    return out


def corrupt_counterfactuals(dgp: GaussianDgp, ds: Dataset, lam: float,
                            rng: Optional[np.random.Generator] = None,
                            mode: str = "per_pair") -> CounterfactualSet:
    """x̂_i(c) = x_i + ξ (0; μ_c − μ_{c_i}), keeping the original at c = c_i.

    ``per_pair`` draws a fresh ξ for every (i, c), ``per_example`` shares one
    ξ across the targets of example i and ``deterministic`` fixes ξ = lam.
    """
    if not 0 < lam <= 1:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    if mode not in CORRUPTION_MODES:
        raise ValueError(f"mode must be one of {CORRUPTION_MODES}")
    if ds.dim != dgp.dim:
        raise ValueError(f"dataset dimension {ds.dim} does not match DGP ({dgp.dim})")
    n, K = len(ds), dgp.num_attributes
    if mode == "deterministic":
        xi = np.full((n, K), float(lam))
    else:
        if rng is None:
            raise ValueError("stochastic corruption needs an rng")
        if mode == "per_pair":
            xi = sample_xi(rng, lam, (n, K))
        else:
            xi = np.repeat(sample_xi(rng, lam, (n, 1)), K, axis=1)
    X = np.repeat(ds.X[:, None, :], K, axis=1)
    shift = dgp.mu_c[None, :, :] - dgp.mu_c[ds.c][:, None, :]
    X[:, :, dgp.spurious_slice] += xi[:, :, None] * shift
    X, kind = _with_originals(X, ds, "corrupted")
    xi[np.arange(n), ds.c] = np.nan
    return CounterfactualSet(X, ds.c.copy(), kind, xi=xi, lam=float(lam))


@dataclass(frozen=True)
class MatchConfig:
    metric: str = "exact_key"
    k_neighbors: int = 1
    caliper: Optional[float] = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if self.caliper is not None and self.caliper < 0:
            raise ValueError("caliper must be nonnegative")


def match_examples(query, pool, cfg: MatchConfig = MatchConfig(),
                   return_distances: bool = False):
    """Indices into ``pool`` of the closest rows to ``query``.

    Rows are ordered by distance, then by index. ``exact_key`` keeps only
    rows equal to the query (distance 0). ``euclidean_standardized`` scales
    each coordinate by the pool's mean and standard deviation (constant
    coordinates are left unscaled) and applies the caliper if one is set.
    """
    pool = np.asarray(pool, dtype=float)
    if pool.ndim == 1:
        pool = pool[:, None]
    if len(pool) == 0:
        raise ValueError("cannot match against an empty pool")
    query = np.atleast_1d(np.asarray(query, dtype=float))
    if query.shape != pool.shape[1:]:
        raise ValueError("query and pool rows have different dimensions")
    if cfg.metric == "exact_key":
        dist = np.where(np.all(pool == query, axis=1), 0.0, np.inf)
        limit = 0.0
    else:
        mean = pool.mean(axis=0)
        sd = pool.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        dist = np.linalg.norm((pool - mean) / sd - (query - mean) / sd, axis=1)
        limit = np.inf if cfg.caliper is None else cfg.caliper
    order = np.lexsort((np.arange(len(pool)), dist))
    order = order[dist[order] <= limit][: cfg.k_neighbors]
    return (order, dist[order]) if return_distances else order


def _donor_pools(ds: Dataset, targets):
    return {c: np.flatnonzero(ds.c == c) for c in targets}


def _fill_by_matching(ds: Dataset, cfg: MatchConfig, on_missing: str, kind_name: str,
                      make: Callable[[int, int, np.ndarray], np.ndarray], targets=None) -> CounterfactualSet:
    if on_missing not in ("raise", "drop"):
        raise ValueError("on_missing must be 'raise' or 'drop'")
    if ds.m is None:
        raise ValueError("matching needs the summary m for every example")
    K = ds.num_attributes
    targets = range(K) if targets is None else targets
    X = np.repeat(ds.X[:, None, :], K, axis=1)
    X, kind = _with_originals(X, ds, "missing")
    out = CounterfactualSet(X, ds.c.copy(), kind)
    pools = _donor_pools(ds, targets)
    for c in targets:
        donors = pools[c]
        for i in np.flatnonzero(ds.c != c):
            idx = (donors[match_examples(ds.m[i], ds.m[donors], cfg)]
                   if len(donors) else np.array([], dtype=np.int64))
            if len(idx) == 0:
                if on_missing == "raise":
                    raise NoMatchError(int(i), int(c))
                continue
            X[i, c] = make(int(i), int(c), idx)
            kind[i, c] = kind_name
            out.matches[(int(i), int(c))] = tuple(int(j) for j in idx)
    return out


def diff_in_diff(ds: Dataset, cfg: MatchConfig = MatchConfig(), targets=None,
                 on_missing: str = "raise") -> CounterfactualSet:
    """x̂_i(c) = x_pre,i + mean over matches j of (x_j − x_pre,j).

    Donors are the examples observed at c whose summary m matches that of
    i. Pairs without a donor raise :class:`NoMatchError` or, with
    ``on_missing="drop"``, stay marked missing.
    """
    if ds.x_pre is None:
        raise ValueError("diff-in-diff needs pre-period features x_pre")
    delta = ds.X - ds.x_pre

    def make(i, c, idx):
        return ds.x_pre[i] + delta[idx].mean(axis=0)

    return _fill_by_matching(ds, cfg, on_missing, "diff_in_diff", make, targets)


def matched_counterfactuals(ds: Dataset, cfg: MatchConfig = MatchConfig(metric="euclidean_standardized"),
                            rewrite: Optional[Callable[[int, int, np.ndarray], np.ndarray]] = None,
                            targets=None, on_missing: str = "raise") -> CounterfactualSet:
    """Counterfactuals from matched examples observed at the target attribute.

    ``rewrite(i, c, donor_indices)`` produces x̂_i(c); the default averages
    the donors' features.
    """
    if rewrite is None:
        def rewrite(i, c, idx):
            return ds.X[idx].mean(axis=0)
    return _fill_by_matching(ds, cfg, on_missing, "matched", rewrite, targets)


@dataclass
class AugmentedDataset:
    data: Dataset                # c holds the target attribute of each record
    source_idx: np.ndarray
    c_target: np.ndarray
    provenance: list

    def __len__(self) -> int:
        return len(self.data)


def build_augmented_dataset(ds: Dataset, cfs: CounterfactualSet,
                            allow_missing: bool = False) -> AugmentedDataset:
    """One record (x̂_i(c), y_i) per example and attribute, source-major."""
    n, K = len(ds), ds.num_attributes
    if cfs.X.shape[:2] != (n, K) or cfs.X.shape[2] != ds.dim:
        raise CoverageGapError(f"counterfactuals have shape {cfs.X.shape}, expected ({n}, {K}, {ds.dim})")
    if not np.array_equal(cfs.source_c, ds.c):
        raise CoverageGapError("counterfactual set was built from a different dataset")
    valid = cfs.valid
    if not allow_missing and not valid.all():
        i, c = np.argwhere(~valid)[0]
        raise CoverageGapError(f"no counterfactual for example {i} at attribute {c}")
    src, tgt = np.nonzero(valid)
    X = cfs.X[src, tgt]
    data = Dataset(X=X, y=ds.y[src], c=tgt, num_classes=ds.num_classes, num_attributes=K)
    prov = [cfs.provenance(i, c) for i, c in zip(src, tgt)]
    return AugmentedDataset(data, src, tgt, prov)


def write_augmented_csv(aug: AugmentedDataset, path) -> None:
    ds = aug.data
    header = dataset_header(ds) + ["source_idx", "c_target", "provenance"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(ds)):
            w.writerow([k, int(ds.y[k]), int(ds.c[k])] + [_fmt(v) for v in ds.X[k]]
                       + [int(aug.source_idx[k]), int(aug.c_target[k]), aug.provenance[k]])
