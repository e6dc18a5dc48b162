"""Training objectives for linear classifiers and their analytic gradients.

All objectives are expressed in terms of the score matrix Z = X W^T + b.
Each term returns its value together with dValue/dZ, and the chain rule back
to (W, b) happens once in :func:`objective_value_and_grad`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax

from .model import score_width

OBJECTIVES = ("erm", "augmented", "reweighted", "mmd", "irmv1", "group_dro")


class EmptyCellError(ValueError):
    def __init__(self, y: int, c: int):
        super().__init__(f"cell (y={y}, c={c}) has zero estimated probability")
        self.y, self.c = y, c


class GroupTooSmallError(ValueError):
    pass


class EmptyEnvironmentError(ValueError):
    pass


@dataclass(frozen=True)
class Objective:
    """Which loss to minimize.

    ``gamma`` weights the MMD or IRMv1 penalty, ``eta_q`` is the GroupDRO
    step size on group weights and ``bandwidth`` is either ``"median"`` or a
    fixed positive RBF bandwidth.
    """

    kind: str = "erm"
    gamma: float = 0.0
    eta_q: float = 0.01
    bandwidth: Union[str, float] = "median"

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.eta_q <= 0:
            raise ValueError("eta_q must be positive")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median":
                raise ValueError("bandwidth must be 'median' or a positive number")
        elif not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def label(self) -> str:
        if self.kind in ("mmd", "irmv1"):
            return f"{self.kind}(gamma={self.gamma:g})"
        if self.kind == "group_dro":
            return f"group_dro(eta_q={self.eta_q:g})"
        return self.kind


# cross-entropy in score space

def per_example_loss(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cross-entropy per example for one-logit (binary) or softmax scores."""
    if Z.shape[1] == 1:
        z = Z[:, 0]
        return np.logaddexp(0.0, z) - y * z
    return -log_softmax(Z, axis=1)[np.arange(len(y)), y]


def loss_score_grad(Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d loss_i / d Z_i, one row per example."""
    if Z.shape[1] == 1:
        return (expit(Z[:, 0]) - y)[:, None]
    G = softmax(Z, axis=1)
    G[np.arange(len(y)), y] -= 1.0
    return G


def _loss_score_hess_vec(Z: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Row-wise Hessian of the per-example loss in Z applied to rows of V."""
    if Z.shape[1] == 1:
        s = expit(Z[:, 0])
        return (s * (1 - s))[:, None] * V
    P = softmax(Z, axis=1)
    return P * V - P * np.sum(P * V, axis=1, keepdims=True)


# importance reweighting

def reweighting_weights(y, c, num_classes: int, num_attributes: int,
                        sample_weight: Optional[np.ndarray] = None) -> np.ndarray:
    """Plug-in weights P(y_i) P(c_i) / P(y_i, c_i).

    With ``sample_weight`` the plug-in estimates use those masses instead of
    counts, which lets a fully enumerated population act as a dataset.
    """
    y = np.asarray(y, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    mass = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    joint = np.zeros((num_classes, num_attributes))
    np.add.at(joint, (y, c), mass)
    joint /= joint.sum()
    py, pc = joint.sum(axis=1), joint.sum(axis=0)
    cell = joint[y, c]
    bad = np.flatnonzero(cell <= 0)
    if len(bad):
        raise EmptyCellError(int(y[bad[0]]), int(c[bad[0]]))
    return py[y] * pc[c] / cell


# MMD penalty on scores

def median_bandwidth(Z: np.ndarray) -> float:
    """Median pairwise Euclidean distance between score rows (i < j)."""
    D = _sq_dists(Z)
    iu = np.triu_indices(len(Z), k=1)
    return float(np.sqrt(np.median(D[iu])))


def _sq_dists(Z: np.ndarray) -> np.ndarray:
    sq = np.sum(Z * Z, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _mmd_coefficients(groups: np.ndarray, weights: np.ndarray, unbiased: bool) -> np.ndarray:
    """Matrix A with sum_{g<h} MMD^2(g, h) = sum_ij A_ij k(z_i, z_j)."""
    labels = np.unique(groups)
    G = len(labels)
    gsum = np.zeros(len(groups))
    for g in labels:
        idx = groups == g
        gsum[idx] = weights[idx].sum()
    a = weights / gsum
    A = -np.outer(a, a)
    for g in labels:
        idx = np.flatnonzero(groups == g)
        w = weights[idx]
        block = np.outer(w, w)
        if unbiased:
            np.fill_diagonal(block, 0.0)
        A[np.ix_(idx, idx)] = (G - 1) * block / block.sum()
    return A


@dataclass
class MmdPlan:
    """Quantities of the MMD penalty that do not depend on the scores."""

    A: np.ndarray        # symmetric


def mmd_plan(groups, weights=None, unbiased: bool = True) -> MmdPlan:
    groups = np.asarray(groups)
    n = len(groups)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    labels, counts = np.unique(groups, return_counts=True)
    if len(labels) < 2:
        raise GroupTooSmallError("MMD needs at least two groups")
    if unbiased and np.any(counts < 2):
        raise GroupTooSmallError(f"group {labels[np.argmin(counts)]} has fewer than 2 points")
    return MmdPlan(_mmd_coefficients(groups, weights, unbiased))


def mmd_penalty_and_grad(Z: np.ndarray, groups=None, weights=None, bandwidth="median",
                         unbiased: bool = True,
                         plan: Optional[MmdPlan] = None) -> tuple[float, np.ndarray]:
    """Sum over group pairs of weighted squared MMD between score samples.

    Uses an RBF kernel exp(-|z - z'|^2 / (2 h^2)). With ``bandwidth="median"``
    h is the pooled median pairwise distance and the gradient includes its
    (almost everywhere defined) dependence on Z. A median of zero falls back
    to h = 1.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if plan is None:
        plan = mmd_plan(groups, weights, unbiased)
    A = plan.A
    n = len(Z)
    D = _sq_dists(Z)
    fixed = not isinstance(bandwidth, str)
    if fixed:
        h = float(bandwidth)
    else:
        # Off-diagonal entries list every pair twice after the n diagonal
        # zeros, so pair rank r sits at flat position n + 2r.
        m = n * (n - 1) // 2
        ranks = [m // 2] if m % 2 else [m // 2 - 1, m // 2]
        pos = [n + 2 * r for r in ranks]
        flat = D.ravel()
        mids = np.argpartition(flat, pos)[pos]
        dist = np.sqrt(flat[mids])
        h = float(dist.mean())
        if h <= 0:
            h, fixed = 1.0, True
    AK = A * np.exp(-D / (2.0 * h * h))
    value = float(AK.sum())

    grad = -2.0 * (AK.sum(axis=1)[:, None] * Z - AK @ Z) / (h * h)
    if not fixed:
        dv_dh = float(np.sum(AK * D)) / h ** 3
        for p, dp in zip(mids, dist):
            if dp == 0:
                continue
            i, j = divmod(int(p), n)
            u = (Z[i] - Z[j]) / dp
            grad[i] += dv_dh * u / len(mids)
            grad[j] -= dv_dh * u / len(mids)
    return value, grad


def mmd_penalty(Z: np.ndarray, groups, weights=None, bandwidth="median",
                unbiased: bool = True) -> float:
    return mmd_penalty_and_grad(Z, groups, weights, bandwidth, unbiased)[0]


# IRMv1 penalty

def irmv1_penalty_and_grad(Z: np.ndarray, y, env) -> tuple[float, np.ndarray]:
    """Sum over environments of (d/ds R_e(s Z) at s = 1)^2."""
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    env = np.asarray(env)
    G = loss_score_grad(Z, y)
    r = np.sum(G * Z, axis=1)
    dr = G + _loss_score_hess_vec(Z, Z)
    value = 0.0
    grad = np.zeros_like(Z)
    for e in np.unique(env):
        idx = env == e
        ne = int(idx.sum())
        g = r[idx].mean()
        value += g * g
        grad[idx] = 2.0 * g * dr[idx] / ne
    return float(value), grad


def irm_scale_gradients(Z: np.ndarray, y, env) -> dict:
    """Per-environment d/ds R_e(s Z) at s = 1."""
    Z = np.asarray(Z, dtype=float)
    r = np.sum(loss_score_grad(Z, np.asarray(y, dtype=np.int64)) * Z, axis=1)
    env = np.asarray(env)
    return {int(e): float(r[env == e].mean()) for e in np.unique(env)}


def irmv1_penalty(Z: np.ndarray, y, env, num_envs: Optional[int] = None) -> float:
    env = np.asarray(env)
    if num_envs is not None:
        present = np.bincount(env, minlength=num_envs)
        if np.any(present == 0):
            raise EmptyEnvironmentError(f"environment {int(np.argmin(present))} is empty")
    return irmv1_penalty_and_grad(Z, y, env)[0]


# GroupDRO

def group_dro_state_update(losses, q, eta_q: float) -> np.ndarray:
    """Exponentiated-gradient step q'_g ∝ q_g exp(eta_q loss_g)."""
    losses = np.asarray(losses, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        logits = np.log(q) + eta_q * losses
    return np.exp(logits - logsumexp(logits))


def group_index(y, c, num_attributes: int) -> np.ndarray:
    return np.asarray(y, dtype=np.int64) * num_attributes + np.asarray(c, dtype=np.int64)


def group_losses(per_loss: np.ndarray, groups: np.ndarray, num_groups: int) -> np.ndarray:
    """Mean loss per group; empty groups get 0."""
    sums = np.bincount(groups, weights=per_loss, minlength=num_groups)
    counts = np.bincount(groups, minlength=num_groups)
    return np.divide(sums, counts, out=np.zeros(num_groups), where=counts > 0)


# full objective

@dataclass
class ObjectiveData:
    """Everything an objective needs besides parameters, precomputed once."""

    X: np.ndarray
    y: np.ndarray
    c: np.ndarray
    num_classes: int
    num_attributes: int
    weights: Optional[np.ndarray] = None        # reweighted / mmd
    mmd_mask: Optional[np.ndarray] = None       # rows entering the MMD term
    mmd_plan: Optional[MmdPlan] = None
    dro_groups: Optional[np.ndarray] = None
    dro_q: Optional[np.ndarray] = None


def prepare(X, y, c, num_classes: int, num_attributes: int,
            objective: Objective) -> ObjectiveData:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    data = ObjectiveData(X, y, c, num_classes, num_attributes)
    if objective.kind in ("reweighted", "mmd"):
        data.weights = reweighting_weights(y, c, num_classes, num_attributes)
    if objective.kind == "mmd":
        counts = np.bincount(c, minlength=num_attributes)
        mask = counts[c] >= 2
        if len(np.unique(c[mask])) < 2:
            raise GroupTooSmallError("MMD needs two attribute groups with at least 2 points")
        data.mmd_mask = mask
        data.mmd_plan = mmd_plan(c[mask], data.weights[mask])
    if objective.kind == "group_dro":
        data.dro_groups = group_index(y, c, num_attributes)
        present = np.bincount(data.dro_groups, minlength=num_classes * num_attributes) > 0
        data.dro_q = present / present.sum()
    return data


def objective_value_and_grad(theta: np.ndarray, data: ObjectiveData,
                             objective: Objective, weight_decay: float) -> tuple[float, np.ndarray]:
    """Objective value and gradient with respect to the flat parameters (W, b).

    The L2 term is (weight_decay / 2) ||W||^2; the bias is not penalized.
    GroupDRO uses the current ``data.dro_q`` as fixed group weights.
    """
    X, y = data.X, data.y
    n, d = X.shape
    w = score_width(data.num_classes)
    W = theta[: w * d].reshape(w, d)
    b = theta[w * d:]
    Z = X @ W.T + b
    losses = per_example_loss(Z, y)
    G = loss_score_grad(Z, y)
    kind = objective.kind

    if kind in ("erm", "augmented"):
        coef = np.full(n, 1.0 / n)
        value = losses.mean()
    elif kind in ("reweighted", "mmd"):
        coef = data.weights / n
        value = float(coef @ losses)
    elif kind == "irmv1":
        envs, inv, counts = np.unique(data.c, return_inverse=True, return_counts=True)
        coef = 1.0 / (len(envs) * counts[inv])
        value = float(coef @ losses)
    else:
        counts = np.bincount(data.dro_groups, minlength=len(data.dro_q))
        coef = data.dro_q[data.dro_groups] / counts[data.dro_groups]
        value = float(coef @ losses)
    dZ = coef[:, None] * G

    if kind == "mmd" and objective.gamma > 0:
        m = data.mmd_mask
        pen, pen_grad = mmd_penalty_and_grad(Z[m], bandwidth=objective.bandwidth, plan=data.mmd_plan)
        value += objective.gamma * pen
        dZ[m] += objective.gamma * pen_grad
    elif kind == "irmv1" and objective.gamma > 0:
        pen, pen_grad = irmv1_penalty_and_grad(Z, y, data.c)
        value += objective.gamma * pen
        dZ += objective.gamma * pen_grad

    value += 0.5 * weight_decay * float(np.sum(W * W))
    gW = dZ.T @ X + weight_decay * W
    gb = dZ.sum(axis=0)
    return float(value), np.concatenate([gW.ravel(), gb])


def dro_group_losses(theta: np.ndarray, data: ObjectiveData) -> np.ndarray:
    n, d = data.X.shape
    w = score_width(data.num_classes)
    Z = data.X @ theta[: w * d].reshape(w, d).T + theta[w * d:]
    return group_losses(per_example_loss(Z, data.y), data.dro_groups, len(data.dro_q))
