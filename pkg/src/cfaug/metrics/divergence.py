"""Total-variation distances used by the augmentation bound."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf
from scipy.stats import truncnorm


def normal_cdf(x):
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=float) / math.sqrt(2.0)))


def tv_gaussian_shared_cov(delta_norm: float, sigma: float) -> float:
    """TV between N(a, s^2 I) and N(b, s^2 I) with |a - b| = delta_norm."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if delta_norm < 0:
        raise ValueError("mean distance must be nonnegative")
    return float(2.0 * normal_cdf(delta_norm / (2.0 * sigma)) - 1.0)


def tv_gaussian_mc(delta_norm: float, sigma: float, n: int, rng: np.random.Generator) -> float:
    """Monte-Carlo TV via the density-ratio event {p > q}.

    TV = P(p > q) - Q(p > q); along the mean difference both reduce to one
    dimension, with p centred at 0 and q at ``delta_norm``.
    """
    xp = sigma * rng.standard_normal(n)
    xq = delta_norm + sigma * rng.standard_normal(n)

    def log_ratio(x):
        return (-(x ** 2) + (x - delta_norm) ** 2) / (2.0 * sigma ** 2)

    return float(np.mean(log_ratio(xp) > 0) - np.mean(log_ratio(xq) > 0))


def tv_discrete(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a probability vector")
    return float(0.5 * np.abs(p - q).sum())


def truncated_xi_quadrature(lam: float, sd: float = 0.1, nodes: int = 64):
    """Gauss-Legendre nodes and weights for E[f(xi)], xi ~ N(lam, sd^2) on (0, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    xi = 0.5 * (x + 1.0)
    dist = truncnorm((0.0 - lam) / sd, (1.0 - lam) / sd, loc=lam, scale=sd)
    weights = 0.5 * w * dist.pdf(xi)
    return xi, weights / weights.sum()


def corruption_tv(shift_norms, mix, sigma_spu: float, lam: float,
                  stochastic: bool = False, sd: float = 0.1, nodes: int = 64) -> float:
    """Upper bound on TV(tau_c pushforward, true counterfactual law) for one target c.

    ``shift_norms[k]`` is |mu_c - mu_k| and ``mix[k]`` the training mass of
    attribute k. A source at attribute k lands (1 - xi) |mu_c - mu_k| away
    from the truth; the TV of the mixture is bounded by the mix-weighted
    average (and, for random xi, by its expectation over xi).
    """
    shift_norms = np.asarray(shift_norms, dtype=float)
    mix = np.asarray(mix, dtype=float)
    if stochastic:
        xi, w = truncated_xi_quadrature(lam, sd, nodes)
    else:
        xi, w = np.array([lam]), np.array([1.0])
    gaps = (1.0 - xi)[:, None] * shift_norms[None, :]
    tv = 2.0 * normal_cdf(gaps / (2.0 * sigma_spu)) - 1.0
    return float(np.clip(w @ tv @ mix, 0.0, 1.0))


def gaussian_corruption_divergences(mu_c: np.ndarray, p_c_train, sigma_spu: float, lam: float,
                                    stochastic: bool = False, sd: float = 0.1,
                                    nodes: int = 64) -> np.ndarray:
    """Per-target-attribute TV bounds for corrupted oracle augmentation."""
    mu_c = np.asarray(mu_c, dtype=float)
    norms = np.linalg.norm(mu_c[:, None, :] - mu_c[None, :, :], axis=2)
    return np.array([corruption_tv(norms[c], p_c_train, sigma_spu, lam, stochastic, sd, nodes)
                     for c in range(len(mu_c))])
