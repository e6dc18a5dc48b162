"""Out-of-distribution accuracy under the unconfounded distribution."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..dgp.gaussian import GaussianDgp, sample_dataset
from ..dgp.policy import InterventionPolicy
from ..train.model import LinearModel
from .divergence import normal_cdf


@dataclass(frozen=True)
class McAccuracy:
    accuracy: float
    se: float
    n: int

    @property
    def risk(self) -> float:
        return 1.0 - self.accuracy


def ood_risk_mc(model, dgp: GaussianDgp, n_mc: int, rng: np.random.Generator,
                policy: Optional[InterventionPolicy] = None) -> McAccuracy:
    """Accuracy of ``model`` on a fresh sample with C uniform and independent of Y."""
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    test = sample_dataset(dgp, n_mc, policy or InterventionPolicy.uniform_c(), rng)
    hit = (model.predict(test.X) == test.y).astype(float)
    acc = float(hit.mean())
    se = math.sqrt(acc * (1.0 - acc) / n_mc)
    return McAccuracy(acc, se, n_mc)


def merge_mc(shards: Iterable[McAccuracy]) -> McAccuracy:
    """Pool independent shards by count-weighted averaging."""
    shards = list(shards)
    n = sum(s.n for s in shards)
    if n == 0:
        raise ValueError("no samples to merge")
    acc = sum(s.accuracy * s.n for s in shards) / n
    return McAccuracy(acc, math.sqrt(acc * (1.0 - acc) / n), n)


def ood_accuracy_exact(model: LinearModel, dgp: GaussianDgp,
                       policy: Optional[InterventionPolicy] = None) -> float:
    """Closed-form accuracy of a binary linear model on the Gaussian mixture.

    Given (y, c) the logit is Gaussian with mean w.mu + b and variance
    sigma^2 |w*|^2 + sigma_spu^2 |w_spu|^2.
    """
    if dgp.num_classes != 2:
        raise ValueError("closed-form accuracy is only available for binary labels")
    table = (policy or InterventionPolicy.uniform_c()).table_for(dgp.p_c_given_y)
    w, b = model.W[0], float(model.b[0])
    w_star, w_spu = w[: dgp.d_star], w[dgp.spurious_slice]
    sd = math.sqrt(dgp.sigma ** 2 * (w_star @ w_star) + dgp.sigma_spu ** 2 * (w_spu @ w_spu))
    mean = (dgp.mu_y @ w_star)[:, None] + (dgp.mu_c @ w_spu)[None, :] + b
    sign = np.array([-1.0, 1.0])[:, None]
    if sd == 0:
        # predict() maps a zero logit to label 0
        correct = np.vstack([mean[0] <= 0, mean[1] > 0]).astype(float)
    else:
        correct = normal_cdf(sign * mean / sd)
    return float(np.sum(dgp.p_y[:, None] * table * correct))


def bayes_xstar_model(dgp: GaussianDgp) -> LinearModel:
    """Bayes-optimal binary classifier that reads x* only.

    Under the unconfounded distribution x_spu carries no label information,
    so this is also the Bayes classifier for that distribution.
    """
    if dgp.num_classes != 2:
        raise ValueError("x*-only Bayes model is implemented for binary labels")
    mu0, mu1 = dgp.mu_y
    s2 = dgp.sigma ** 2
    w = np.zeros(dgp.dim)
    w[: dgp.d_star] = (mu1 - mu0) / s2
    b = -(mu1 @ mu1 - mu0 @ mu0) / (2 * s2) + math.log(dgp.p_y[1] / dgp.p_y[0])
    return LinearModel(w[None, :], np.array([b]), 2)
