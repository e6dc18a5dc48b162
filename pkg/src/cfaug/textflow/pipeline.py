"""Spurious splits, bag-of-words training and the end-to-end review pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.feature_extraction.text import CountVectorizer

from ..dgp.data import Dataset
from ..train import Objective, TrainConfig, evaluate, fit
from .reviews import Review, ingest_reviews
from .rewrite import (
    AssembleConfig,
    HttpRewriter,
    MockRewriter,
    match_and_assemble,
    rewrite,
)
from .synthetic import generate_reviews

TOKEN_PATTERN = r"[a-z0-9]+"
AUG_MODES = ("naive", "conditional", "counterfactual")


class InfeasibleSplitError(ValueError):
    pass


def phi_coefficient(counts: np.ndarray) -> float:
    """Pearson correlation of two binary variables from a 2 x 2 count table."""
    (n00, n01), (n10, n11) = counts
    denom = (n00 + n01) * (n10 + n11) * (n00 + n10) * (n01 + n11)
    if denom == 0:
        return 0.0
    return float((n11 * n00 - n10 * n01) / math.sqrt(denom))


def label_mention_corr(reviews) -> float:
    counts = np.zeros((2, 2))
    for r in reviews:
        counts[r.label, r.food_mention] += 1
    return phi_coefficient(counts)


def make_spurious_split(reviews, target_corr: float, rng: np.random.Generator,
                        tol: float = 0.02, min_cell: int = 1) -> list[Review]:
    """Subsample so corr(label, food_mention) lands within ``tol`` of the target.

    Greedy: repeatedly drop a random review from whichever (label, mention)
    cell brings the correlation closest to the target, until within tol / 4
    or no removal helps. Every cell keeps at least ``min_cell`` reviews.
    """
    reviews = list(reviews)
    cells = [[[], []], [[], []]]
    for i, r in enumerate(reviews):
        cells[r.label][r.food_mention].append(i)
    counts = np.array([[len(cells[a][b]) for b in (0, 1)] for a in (0, 1)], dtype=float)
    if counts.min() < min_cell:
        raise InfeasibleSplitError(f"cell counts {counts.astype(int).tolist()} below minimum {min_cell}")
    order = {(a, b): list(rng.permutation(cells[a][b])) for a in (0, 1) for b in (0, 1)}
    gap = abs(phi_coefficient(counts) - target_corr)
    while gap > tol / 4:
        best, best_gap = None, gap
        for a in (0, 1):
            for b in (0, 1):
                if counts[a, b] <= min_cell:
                    continue
                counts[a, b] -= 1
                g = abs(phi_coefficient(counts) - target_corr)
                counts[a, b] += 1
                if g < best_gap:
                    best, best_gap = (a, b), g
        if best is None:
            break
        order[best].pop()
        counts[best] -= 1
        gap = best_gap
    if gap > tol:
        raise InfeasibleSplitError(
            f"correlation {target_corr} is out of reach: best {phi_coefficient(counts):.4f} "
            f"with cells {counts.astype(int).tolist()}")
    keep = sorted(i for idx in order.values() for i in idx)
    return [reviews[i] for i in keep]


def bow_vectorizer(min_df: int = 2) -> CountVectorizer:
    return CountVectorizer(lowercase=True, token_pattern=TOKEN_PATTERN, min_df=min_df)


def reviews_dataset(reviews, X) -> Dataset:
    y = np.array([r.label for r in reviews], dtype=np.int64)
    c = np.array([r.food_mention for r in reviews], dtype=np.int64)
    return Dataset(X=np.asarray(X, dtype=float), y=y, c=c, num_classes=2, num_attributes=2)


def train_bow(train_reviews, eval_reviews, min_df: int = 2,
              cfg: TrainConfig = TrainConfig()) -> dict:
    vec = bow_vectorizer(min_df)
    Xtr = vec.fit_transform([r.text for r in train_reviews]).toarray()
    Xev = vec.transform([r.text for r in eval_reviews]).toarray()
    train = reviews_dataset(train_reviews, Xtr)
    ev = reviews_dataset(eval_reviews, Xev)
    model = fit(train, Objective("erm"), cfg)
    return {"train_acc": evaluate(model, train).accuracy,
            "eval_acc": evaluate(model, ev).accuracy,
            "eval_worst_group_acc": evaluate(model, ev).worst_group_accuracy,
            "vocab": len(vec.vocabulary_)}


@dataclass(frozen=True)
class TextflowConfig:
    reviews_csv: Optional[str] = None
    pool_size: int = 3000
    eval_fraction: float = 0.4
    target_corr: float = 0.72
    eval_corr: float = 0.0
    tol: float = 0.02
    modes: tuple = ("baseline",) + AUG_MODES
    per_review: int = 1
    min_df: int = 2
    weight_decay: float = 1e-4
    seed: int = 0
    max_in_flight: int = 4
    endpoint: Optional[str] = None
    endpoint_model: Optional[str] = None
    timeout: float = 60.0
    retries: int = 2


@dataclass
class TextflowResult:
    metrics: list = field(default_factory=list)
    augmented: dict = field(default_factory=dict)     # mode -> list of Review
    errors: list = field(default_factory=list)        # (mode, request index, message)
    train: list = field(default_factory=list)
    eval: list = field(default_factory=list)


def run_textflow(cfg: TextflowConfig = TextflowConfig(), rewriter=None) -> TextflowResult:
    """Ingest, split, match, rewrite, then train and evaluate per mode.

    Modes that produce no rewrite requests are skipped, so a pool without
    any matches reports the unaugmented baseline only.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.reviews_csv:
        pool = ingest_reviews(cfg.reviews_csv)
    else:
        pool = generate_reviews(cfg.pool_size, rng)
    if rewriter is None:
        rewriter = (HttpRewriter(cfg.endpoint, cfg.endpoint_model, timeout=cfg.timeout,
                                 retries=cfg.retries) if cfg.endpoint else MockRewriter())
    perm = rng.permutation(len(pool))
    n_eval = int(round(cfg.eval_fraction * len(pool)))
    eval_pool = [pool[i] for i in sorted(perm[:n_eval])]
    train_pool = [pool[i] for i in sorted(perm[n_eval:])]
    train = make_spurious_split(train_pool, cfg.target_corr, rng, cfg.tol)
    ev = make_spurious_split(eval_pool, cfg.eval_corr, rng, cfg.tol)
    out = TextflowResult(train=train, eval=ev)
    tcfg = TrainConfig(weight_decay=cfg.weight_decay, seed=cfg.seed)
    base = {"seed": cfg.seed, "n_train": len(train), "n_eval": len(ev),
            "train_corr": label_mention_corr(train), "eval_corr": label_mention_corr(ev)}
    for mode in cfg.modes:
        if mode == "baseline":
            aug, unmatched, n_req = [], 0, 0
        else:
            reqs, unmatched = match_and_assemble(train, mode, AssembleConfig(cfg.per_review), rng)
            if not reqs:
                # Nothing to rewrite: the model would equal the baseline.
                continue
            res = rewrite(reqs, rewriter, cfg.max_in_flight)
            aug, n_req = res.reviews, len(reqs)
            out.errors += [(mode, i, msg) for i, msg in res.errors]
        out.augmented[mode] = aug
        scores = train_bow(train + aug, ev, cfg.min_df, tcfg)
        out.metrics.append({**base, "mode": mode, "n_requests": n_req, "n_aug": len(aug),
                            "n_unmatched": unmatched, "n_errors": n_req - len(aug),
                            "aug_train_corr": label_mention_corr(train + aug), **scores})
    return out
