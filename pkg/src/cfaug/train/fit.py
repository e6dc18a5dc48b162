"""Full-batch training and evaluation of linear classifiers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ..dgp.data import Dataset
from .model import LinearModel, score_width
from .objectives import (
    Objective,
    dro_group_losses,
    group_dro_state_update,
    objective_value_and_grad,
    prepare,
)

OPTIMIZERS = ("lbfgs", "gd")


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    ``optimizer="gd"`` runs plain full-batch gradient descent with step
    ``lr``; ``"lbfgs"`` hands the same objective to scipy's L-BFGS-B and
    ignores ``lr``. GroupDRO always uses gradient descent because its group
    weights are updated between steps. With ``precondition`` gradient
    descent runs in whitened feature coordinates, an exact
    reparameterization of the same objective that removes the ill
    conditioning of raw features.
    """

    lr: float = 0.05
    iterations: int = 3000
    weight_decay: float = 1e-4
    tol: float = 1e-5
    seed: int = 0
    optimizer: str = "lbfgs"
    precondition: bool = True

    def __post_init__(self):
        if self.lr <= 0 or self.tol <= 0 or self.weight_decay < 0:
            raise ValueError("lr and tol must be positive, weight_decay nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class FitInfo:
    iterations: int
    converged: bool
    final_objective: float
    grad_norm: float
    group_weights: Optional[np.ndarray] = None


def _check(value: float, grad: np.ndarray, step: int) -> None:
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteLossError(f"objective became non-finite at step {step}")


class _Whitening:
    """Reparameterization W = V P, b = a - W mu with P = (Cov X + eps I)^(-1/2)."""

    def __init__(self, X: np.ndarray, width: int):
        self.mu = X.mean(axis=0)
        cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
        evals, evecs = np.linalg.eigh(cov)
        evals = np.maximum(evals, 0.0) + 1e-6 * max(evals.mean(), 1e-12)
        self.P = (evecs / np.sqrt(evals)) @ evecs.T
        self.P_inv = (evecs * np.sqrt(evals)) @ evecs.T
        self.width, self.dim = width, X.shape[1]

    def _split(self, t):
        k = self.width * self.dim
        return t[:k].reshape(self.width, self.dim), t[k:]

    def to_model(self, t):
        V, a = self._split(t)
        W = V @ self.P
        return np.concatenate([W.ravel(), a - W @ self.mu])

    def from_model(self, theta):
        W, b = self._split(theta)
        return np.concatenate([(W @ self.P_inv).ravel(), b + W @ self.mu])

    def pull_grad(self, g):
        gW, gb = self._split(g)
        return np.concatenate([((gW - np.outer(gb, self.mu)) @ self.P).ravel(), gb])


def fit(data: Dataset, objective: Objective = Objective(), cfg: TrainConfig = TrainConfig(),
        init: Optional[LinearModel] = None, return_info: bool = False):
    """Minimize ``objective`` over linear models on ``data``.

    Training starts from the zero model (or ``init``) and is deterministic.
    Augmented datasets are passed as ordinary datasets of N*K records, so
    ``augmented`` and ``erm`` minimize the same mean cross-entropy.
    """
    if len(data) == 0:
        raise ValueError("cannot fit on an empty dataset")
    prep = prepare(data.X, data.y, data.c, data.num_classes, data.num_attributes, objective)
    dim = data.dim
    if init is not None:
        theta = init.to_params()
    elif objective.kind == "mmd" and objective.bandwidth == "median" and objective.gamma > 0:
        # A median-bandwidth penalty is scale free and jumps at the zero model,
        # so start from the reweighted solution it is added to.
        theta = fit(data, Objective("reweighted"), cfg).to_params()
    else:
        theta = np.zeros(score_width(data.num_classes) * (dim + 1))

    def fun(t):
        return objective_value_and_grad(t, prep, objective, cfg.weight_decay)

    if cfg.optimizer == "lbfgs" and objective.kind != "group_dro":
        calls = [0]

        def checked(t):
            calls[0] += 1
            v, g = fun(t)
            _check(v, g, calls[0])
            return v, g

        res = minimize(checked, theta, jac=True, method="L-BFGS-B",
                       options={"maxiter": cfg.iterations, "gtol": cfg.tol,
                                "ftol": 1e-15, "maxcor": 20})
        theta = res.x
        value, grad = fun(theta)
        gnorm = float(np.linalg.norm(grad))
        info = FitInfo(int(res.nit), gnorm <= cfg.tol or bool(res.success), value, gnorm)
    else:
        white = _Whitening(prep.X, score_width(data.num_classes)) if cfg.precondition else None
        t = white.from_model(theta) if white else theta
        value, gnorm, step, converged = np.nan, np.nan, 0, False
        for step in range(1, cfg.iterations + 1):
            theta = white.to_model(t) if white else t
            if objective.kind == "group_dro":
                prep.dro_q = group_dro_state_update(dro_group_losses(theta, prep),
                                                    prep.dro_q, objective.eta_q)
            value, grad = fun(theta)
            _check(value, grad, step)
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= cfg.tol:
                converged = True
                break
            t = t - cfg.lr * (white.pull_grad(grad) if white else grad)
        theta = white.to_model(t) if white else t
        info = FitInfo(step, converged, float(value), gnorm,
                       prep.dro_q.copy() if prep.dro_q is not None else None)
    model = LinearModel.from_params(theta, dim, data.num_classes)
    return (model, info) if return_info else model


@dataclass
class EvalResult:
    accuracy: float
    risk: float
    n: int
    confusion: np.ndarray                   # (true label, predicted label)
    group_counts: np.ndarray                # (y, c) example counts
    group_correct: np.ndarray               # (y, c) correct predictions
    group_accuracy: np.ndarray = field(init=False)

    def __post_init__(self):
        self.group_accuracy = np.divide(self.group_correct, self.group_counts,
                                        out=np.full(self.group_counts.shape, np.nan),
                                        where=self.group_counts > 0)

    @property
    def worst_group_accuracy(self) -> float:
        return float(np.nanmin(self.group_accuracy))


def evaluate(model: LinearModel, data: Dataset) -> EvalResult:
    pred = model.predict(data.X)
    correct = pred == data.y
    L, K = data.num_classes, data.num_attributes
    confusion = np.zeros((L, L), dtype=np.int64)
    np.add.at(confusion, (data.y, pred), 1)
    counts = np.zeros((L, K), dtype=np.int64)
    np.add.at(counts, (data.y, data.c), 1)
    hits = np.zeros((L, K), dtype=np.int64)
    np.add.at(hits, (data.y, data.c), correct.astype(np.int64))
    acc = float(correct.mean()) if len(data) else float("nan")
    return EvalResult(acc, 1.0 - acc, len(data), confusion, counts, hits)
