"""Joint label/attribute tables and dependence measures on them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ZeroMarginalError(ValueError):
    pass


@dataclass(frozen=True)
class JointTable:
    """P(Y = y, C = c) as an L x K array."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 2:
            raise ValueError("joint table must be two-dimensional")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("joint table has negative or non-finite entries")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"joint table sums to {p.sum():.15g}, not 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def from_conditional(cls, p_y, p_c_given_y) -> "JointTable":
        return cls(np.asarray(p_y, dtype=float)[:, None] * np.asarray(p_c_given_y, dtype=float))

    @classmethod
    def from_samples(cls, y, c, num_classes: int, num_attributes: int) -> "JointTable":
        counts = np.zeros((num_classes, num_attributes))
        np.add.at(counts, (np.asarray(y), np.asarray(c)), 1.0)
        return cls(counts / counts.sum())

    @property
    def p_y(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def p_c(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def product(self) -> np.ndarray:
        return np.outer(self.p_y, self.p_c)


def _as_table(jt) -> JointTable:
    return jt if isinstance(jt, JointTable) else JointTable(jt)


def mutual_information(jt, base: float = math.e) -> float:
    """I(Y; C) with 0 log 0 = 0. Nats by default, bits with ``base=2``."""
    jt = _as_table(jt)
    p, prod = jt.p, jt.product
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / prod[nz])) / math.log(base))


def renyi_dependence(jt, alpha) -> float:
    """Exponentiated Rényi divergence between P(Y, C) and P(Y) P(C).

    ``alpha=2`` gives sum p^2 / (p_y p_c); ``alpha=inf`` the largest ratio
    p / (p_y p_c).
    """
    jt = _as_table(jt)
    if np.any(jt.p_y <= 0) or np.any(jt.p_c <= 0):
        raise ZeroMarginalError("Rényi dependence needs strictly positive marginals")
    ratio = jt.p / jt.product
    if alpha == 2:
        return float(np.sum(jt.p * ratio))
    if alpha == math.inf or alpha == "inf":
        return float(ratio.max())
    raise ValueError("alpha must be 2 or inf")


def importance_divergence(jt, alpha) -> float:
    """Exponentiated Rényi divergence of P(Y) P(C) from P(Y, C).

    The direction that controls importance weights w = p_y p_c / p:
    ``alpha=2`` gives E[w^2] = sum (p_y p_c)^2 / p and ``alpha=inf`` the
    largest weight. Cells with p = 0 and positive product mass make it infinite.
    """
    jt = _as_table(jt)
    if np.any(jt.p_y <= 0) or np.any(jt.p_c <= 0):
        raise ZeroMarginalError("importance divergence needs strictly positive marginals")
    prod = jt.product
    with np.errstate(divide="ignore"):
        w = np.where(jt.p > 0, prod / np.where(jt.p > 0, jt.p, 1.0), math.inf)
    if alpha == 2:
        return float(np.sum(prod * w))
    if alpha == math.inf or alpha == "inf":
        return float(w.max())
    raise ValueError("alpha must be 2 or inf")
