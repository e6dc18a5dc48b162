"""Seeded sweeps over correlation strength and sample size, plus bound reports.

Every cell of a sweep is an independent simulation identified by its
coordinates (MI bucket, repetition, N). Random streams are derived from a
hash of the base seed and those coordinates, so results do not depend on
execution order or parallelism.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .augment import (
    MatchConfig,
    build_augmented_dataset,
    corrupt_counterfactuals,
    diff_in_diff,
    oracle_set,
)
from .dgp import (
    InterventionPolicy,
    build_default_gaussian_dgp,
    sample_correlated_table,
    sample_dataset,
    sample_panel_dataset,
)
from .metrics import (
    JointTable,
    aug_bound,
    bayes_xstar_model,
    gaussian_corruption_divergences,
    mutual_information,
    ood_accuracy_exact,
    ood_risk_mc,
    renyi_bound,
)
from .train import LinearModel, Objective, TrainConfig, evaluate, fit

SCHEMA_VERSION = 1
METHODS = ("erm", "reweight", "mmd", "irmv1", "group_dro", "aug_oracle", "aug_corrupt",
           "aug_diff_in_diff", "xstar_only")
AUG_METHODS = ("aug_oracle", "aug_corrupt", "aug_diff_in_diff")


def derive_seed(base_seed: int, *coords) -> int:
    """Stable 63-bit child seed from the base seed and sweep coordinates."""
    key = repr((int(base_seed),) + tuple(coords)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") >> 1


def check_unique_seeds(seeds) -> None:
    seen = {}
    for coords, s in seeds:
        if s in seen:
            raise RuntimeError(f"seed collision between {seen[s]} and {coords}")
        seen[s] = coords


def default_mi_grid(step: float = 0.05, top: float = 0.9) -> list:
    n = int(round(top / step))
    return [[round(k * step, 10), round((k + 1) * step, 10)] for k in range(n)]


@dataclass
class SweepConfig:
    """One sweep over MI buckets x repetitions x training sizes.

    MI is measured in bits. ``lambdas`` expands ``aug_corrupt`` into one
    method per corruption level.
    """

    methods: list = field(default_factory=lambda: ["erm", "reweight", "aug_oracle", "aug_corrupt"])
    lambdas: list = field(default_factory=lambda: [0.2, 0.3])
    n_train: list = field(default_factory=lambda: [600])
    mi_grid: list = field(default_factory=default_mi_grid)
    repetitions: int = 30
    base_seed: int = 0
    delta: float = 0.05
    n_mc: int = 10_000
    corruption_mode: str = "per_pair"
    table_alpha: object = "flat"
    mmd_gamma: float = 1.0
    irm_gamma: float = 1.0
    dro_eta: float = 0.01
    lr: float = 0.05
    iterations: int = 3000
    weight_decay: float = 1e-4
    tol: float = 1e-5
    optimizer: str = "lbfgs"
    parallelism: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if any(not 0 < lam <= 1 for lam in self.lambdas):
            raise ValueError("lambda values must lie in (0, 1]")
        if any(n < 1 for n in self.n_train):
            raise ValueError("training sizes must be positive")
        for lo, hi in self.mi_grid:
            if not 0 <= lo < hi or lo > 1.0:
                raise ValueError(f"MI bucket [{lo}, {hi}] is outside the feasible range [0, 1] bits")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, iterations=self.iterations, weight_decay=self.weight_decay,
                           tol=self.tol, optimizer=self.optimizer)

    def method_specs(self) -> list[tuple[str, float]]:
        out = []
        for m in self.methods:
            if m == "aug_corrupt":
                out += [(m, float(lam)) for lam in self.lambdas]
            else:
                out.append((m, float("nan")))
        return out

    def cells(self) -> list[tuple[int, int, int]]:
        return [(b, r, n) for b in range(len(self.mi_grid)) for r in range(self.repetitions)
                for n in self.n_train]


def corr_sweep_defaults(**overrides) -> SweepConfig:
    return SweepConfig(**overrides)


def n_sweep_defaults(**overrides) -> SweepConfig:
    base = dict(methods=["erm", "reweight", "aug_corrupt"], lambdas=[0.2, 0.3],
                n_train=[200, 600, 2000], mi_grid=[[0.7, 0.8]], repetitions=15)
    base.update(overrides)
    return SweepConfig(**base)


def _objective(method: str, cfg: SweepConfig) -> Objective:
    return {
        "erm": Objective("erm"),
        "xstar_only": Objective("erm"),
        "reweight": Objective("reweighted"),
        "mmd": Objective("mmd", gamma=cfg.mmd_gamma),
        "irmv1": Objective("irmv1", gamma=cfg.irm_gamma),
        "group_dro": Objective("group_dro", eta_q=cfg.dro_eta),
    }.get(method, Objective("augmented"))


def cell_dgp(cfg: SweepConfig, bucket: int, rep: int):
    """DGP for one (bucket, repetition); shared across training sizes."""
    seed = derive_seed(cfg.base_seed, "dgp", bucket, rep)
    dgp = build_default_gaussian_dgp(seed)
    rng = np.random.default_rng(derive_seed(cfg.base_seed, "table", bucket, rep))
    table = sample_correlated_table(dgp, cfg.mi_grid[bucket], rng, base=2, alpha=cfg.table_alpha)
    return dgp.with_table(table)


def train_method(method: str, lam: float, dgp, train, cfg: SweepConfig, rng):
    """Fit one method; returns (model, training set it was fit on)."""
    tcfg = cfg.train_config
    if method == "xstar_only":
        X = np.zeros_like(train.X)
        X[:, : dgp.d_star] = train.X[:, : dgp.d_star]
        data = dataclasses.replace(train, X=X)
        return fit(data, Objective("erm"), tcfg), data
    if method == "aug_oracle":
        data = build_augmented_dataset(train, oracle_set(dgp, train)).data
    elif method == "aug_corrupt":
        data = build_augmented_dataset(
            train, corrupt_counterfactuals(dgp, train, lam, rng, cfg.corruption_mode)).data
    elif method == "aug_diff_in_diff":
        cfs = diff_in_diff(train, MatchConfig("exact_key"), on_missing="drop")
        data = build_augmented_dataset(train, cfs, allow_missing=True).data
    else:
        data = train
    return fit(data, _objective(method, cfg), tcfg), data


def run_cell(cfg: SweepConfig, bucket: int, rep: int, n: int):
    """All methods on one sweep cell. Returns (rows, errors)."""
    rows, errors = [], []
    lo, hi = cfg.mi_grid[bucket]
    coords = {"mi_lo": lo, "mi_hi": hi, "rep": rep, "n_train": n}
    try:
        dgp = cell_dgp(cfg, bucket, rep)
        data_seed = derive_seed(cfg.base_seed, "data", bucket, rep, n)
        rng = np.random.default_rng(data_seed)
        needs_panel = "aug_diff_in_diff" in cfg.methods
        train = (sample_panel_dataset(dgp, n, rng) if needs_panel
                 else sample_dataset(dgp, n, None, rng))
        mc_rng = np.random.default_rng(derive_seed(cfg.base_seed, "mc", bucket, rep, n))
        test_seed = int(mc_rng.integers(2 ** 63))
        id_seed = int(mc_rng.integers(2 ** 63))
        mi = mutual_information(JointTable(dgp.joint_table()), base=2)
    except Exception as exc:  # noqa: BLE001 - a failed cell is recorded, not raised
        errors.append({**coords, "method": "*", "lam": "", "error": _describe(exc)})
        return rows, errors
    for method, lam in cfg.method_specs():
        try:
            mrng = np.random.default_rng(derive_seed(cfg.base_seed, "method", bucket, rep, n, method, lam))
            model, _ = train_method(method, lam, dgp, train, cfg, mrng)
            ood = ood_risk_mc(model, dgp, cfg.n_mc, np.random.default_rng(test_seed))
            idacc = ood_risk_mc(model, dgp, cfg.n_mc, np.random.default_rng(id_seed),
                                InterventionPolicy.keep_training())
            rows.append({
                "schema": SCHEMA_VERSION, "method": method, "lam": lam, **coords,
                "mi": mi, "seed": data_seed, "ood_acc": ood.accuracy, "ood_se": ood.se,
                "ood_acc_exact": ood_accuracy_exact(model, dgp), "id_acc": idacc.accuracy,
            })
        except Exception as exc:  # noqa: BLE001
            errors.append({**coords, "method": method, "lam": lam, "error": _describe(exc)})
    return rows, errors


def _describe(exc: Exception) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    where = f" at {tb[-1].name}:{tb[-1].lineno}" if tb else ""
    return f"{type(exc).__name__}: {exc}{where}"


def _run_cell_tuple(args):
    return run_cell(*args)


def _sort_key(row: dict):
    lam = row.get("lam")
    lam = -1.0 if lam in ("", None) or (isinstance(lam, float) and math.isnan(lam)) else lam
    return (row["mi_lo"], row["rep"], row["n_train"], row["method"], lam)


def run_sweep(cfg: SweepConfig) -> tuple[list[dict], list[dict]]:
    cells = cfg.cells()
    check_unique_seeds([((b, r, n), derive_seed(cfg.base_seed, "data", b, r, n)) for b, r, n in cells])
    check_unique_seeds([((b, r), derive_seed(cfg.base_seed, "dgp", b, r))
                        for b in range(len(cfg.mi_grid)) for r in range(cfg.repetitions)])
    jobs = [(cfg, b, r, n) for b, r, n in cells]
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_run_cell_tuple, jobs))
    else:
        results = [run_cell(*job) for job in jobs]
    rows = sorted((r for res in results for r in res[0]), key=_sort_key)
    errors = sorted((e for res in results for e in res[1]), key=_sort_key)
    return rows, errors


# --- bounds -------------------------------------------------------------------

def bound_cell(cfg: SweepConfig, bucket: int, rep: int, n: int,
               model: Optional[LinearModel] = None) -> tuple[list[dict], list[dict]]:
    """Rényi bound for the reweighted model and the augmentation bound per method.

    The reweighted risk is estimated on an independent holdout sample with
    the population weights P(Y)P(C) / P(Y, C); the augmentation risk on the
    method's augmented training set. With ``model`` given, that artifact
    replaces the in-sweep fit of every method.
    """
    rows, errors = [], []
    lo, hi = cfg.mi_grid[bucket]
    coords = {"mi_lo": lo, "mi_hi": hi, "rep": rep, "n_train": n}
    try:
        dgp = cell_dgp(cfg, bucket, rep)
        rng = np.random.default_rng(derive_seed(cfg.base_seed, "data", bucket, rep, n))
        train = sample_dataset(dgp, n, None, rng)
        holdout = sample_dataset(dgp, n, None, rng)
        jt = JointTable(dgp.joint_table())
        h_star = bayes_xstar_model(dgp)
        r_perp_star = 1.0 - ood_accuracy_exact(h_star, dgp)
        r_aug_star = 1.0 - ood_accuracy_exact(h_star, dgp, InterventionPolicy.keep_training())
    except Exception as exc:  # noqa: BLE001
        errors.append({**coords, "method": "*", "lam": "", "error": _describe(exc)})
        return rows, errors
    for method, lam in cfg.method_specs():
        if method not in ("reweight",) + AUG_METHODS or method == "aug_diff_in_diff":
            continue
        try:
            mrng = np.random.default_rng(derive_seed(cfg.base_seed, "method", bucket, rep, n, method, lam))
            fitted, data = train_method(method, lam, dgp, train, cfg, mrng)
            if model is not None:
                fitted = model
            r_perp = 1.0 - ood_accuracy_exact(fitted, dgp)
            if method == "reweight":
                # Known population weights: plug-in weights drop the (y, c) cells a
                # small holdout misses, which are the ones a spurious model gets wrong.
                w = (jt.product / jt.p)[holdout.y, holdout.c]
                miss = (fitted.predict(holdout.X) != holdout.y).astype(float)
                report = renyi_bound(float(np.mean(w * miss)), jt, n, cfg.delta)
            else:
                emp = evaluate(fitted, data).risk
                if method == "aug_oracle":
                    div = np.zeros(dgp.num_attributes)
                else:
                    div = gaussian_corruption_divergences(
                        dgp.mu_c, dgp.joint_table().sum(axis=0), dgp.sigma_spu, lam,
                        stochastic=cfg.corruption_mode != "deterministic")
                # The fitted model stands in for the population minimizer h*_aug;
                # h* is optimal under P-perp, so the difference cannot be negative.
                lam_main_risk = max(r_perp, r_perp_star)
                report = aug_bound(emp, div, n, cfg.delta, r_perp_star, lam_main_risk, r_aug_star)
            for row in report.rows():
                rows.append({"schema": SCHEMA_VERSION, "method": method, "lam": lam, **coords,
                             "risk_perp": r_perp, **row})
        except Exception as exc:  # noqa: BLE001
            errors.append({**coords, "method": method, "lam": lam, "error": _describe(exc)})
    return rows, errors


def run_bounds(cfg: SweepConfig, model_path=None) -> tuple[list[dict], list[dict]]:
    """Bound reports for every cell; ``model_path`` loads a saved model artifact."""
    model = None
    if model_path is not None:
        if not Path(model_path).is_file():
            raise FileNotFoundError(f"model artifact {model_path} does not exist")
        model = LinearModel.load(model_path)
    results = [bound_cell(cfg, b, r, n, model) for b, r, n in cfg.cells()]
    key = lambda row: (_sort_key(row), row.get("variant", ""))  # noqa: E731
    return (sorted((r for res in results for r in res[0]), key=key),
            sorted((e for res in results for e in res[1]), key=_sort_key))


def summarize(rows: list[dict]) -> list[dict]:
    """Mean OOD accuracy with its standard error per (method, lam, bucket, N)."""
    groups: dict = {}
    for r in rows:
        lam = r["lam"]
        key = (r["method"], -1.0 if isinstance(lam, float) and math.isnan(lam) else lam,
               r["mi_lo"], r["mi_hi"], r["n_train"])
        groups.setdefault(key, []).append(r["ood_acc"])
    out = []
    for (method, lam, lo, hi, n), accs in sorted(groups.items()):
        a = np.asarray(accs)
        se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else float("nan")
        out.append({"schema": SCHEMA_VERSION, "method": method,
                    "lam": float("nan") if lam == -1.0 else lam, "mi_lo": lo, "mi_hi": hi,
                    "n_train": n, "reps": len(a), "mean_ood_acc": float(a.mean()), "se": se})
    return out


def crossing(summary: list[dict], lam: float = 0.2, small_n: int = 600) -> Optional[bool]:
    """Does reweighting trail aug(lam) at ``small_n`` and lead it at the largest N?

    Returns None when the summary lacks the needed points.
    """
    rw = {s["n_train"]: s["mean_ood_acc"] for s in summary if s["method"] == "reweight"}
    aug = {s["n_train"]: s["mean_ood_acc"] for s in summary
           if s["method"] == "aug_corrupt" and s["lam"] == lam}
    ns = sorted(set(rw) & set(aug))
    if small_n not in ns or ns[-1] == small_n:
        return None
    return bool(rw[small_n] < aug[small_n] and rw[ns[-1]] > aug[ns[-1]])


# --- output -------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_rows(rows: list[dict], path, columns: Optional[list] = None) -> None:
    columns = columns or list(dict.fromkeys(k for r in rows for k in r))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k, "")) for k in columns})


SWEEP_COLUMNS = ["schema", "method", "lam", "mi_lo", "mi_hi", "rep", "n_train", "mi", "seed",
                 "ood_acc", "ood_se", "ood_acc_exact", "id_acc"]
ERROR_COLUMNS = ["mi_lo", "mi_hi", "rep", "n_train", "method", "lam", "error"]
