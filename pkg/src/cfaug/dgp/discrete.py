"""Finite causal model over (Y, X*, C, M, X) that can be enumerated exactly.

The factorization is P(y) P(x*|y) P~(c|y) P(m|c, x*) P(x|x*, c, m), with a
deterministic extractor ``e`` such that ``e(x) = x*`` on the support. Tables are
small (<= 8 values per variable), so risks are computed by full enumeration.

Counterfactuals use the inverse-CDF representation of the structural model:
each unit carries uniform exogenous draws (u_m, u_x), and
``M(c) = F^-1_{M|c,x*}(u_m)``, ``X(c) = F^-1_{X|x*,c,M(c)}(u_x)``. Exact
expectations over the exogenous noise are taken by integrating over the
intervals between CDF breakpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .policy import InterventionPolicy, check_conditional_table

MAX_ALPHABET = 8

Hypothesis = Union[np.ndarray, Callable[[int], int]]


@dataclass
class DiscreteDgp:
    p_y: np.ndarray                   # (L,)
    p_xstar_given_y: np.ndarray       # (L, S)
    p_c_given_y: np.ndarray           # (L, K) training mechanism
    p_x_given: np.ndarray             # (S, K, Mv, X)
    extractor: np.ndarray             # (X,) -> x*
    p_m_given: Optional[np.ndarray] = None  # (K, S, Mv); None means no auxiliary variable

    def __post_init__(self):
        self.p_y = check_conditional_table(self.p_y, "P(Y)")
        self.p_xstar_given_y = check_conditional_table(self.p_xstar_given_y, "P(X*|Y)")
        self.p_c_given_y = check_conditional_table(self.p_c_given_y, "P(C|Y)")
        p_x = np.asarray(self.p_x_given, dtype=float)
        if p_x.ndim == 3:
            p_x = p_x[:, :, None, :]
        self.p_x_given = check_conditional_table(p_x, "P(X|X*,C,M)")
        S, K, Mv, Xn = self.p_x_given.shape
        if self.p_m_given is None:
            if Mv != 1:
                raise ValueError("P(X|X*,C,M) has an M axis but no P(M|C,X*) was given")
            self.p_m_given = np.ones((K, S, 1))
        self.p_m_given = check_conditional_table(self.p_m_given, "P(M|C,X*)")
        L = len(self.p_y)
        if self.p_xstar_given_y.shape != (L, S) or self.p_c_given_y.shape != (L, K):
            raise ValueError("table shapes disagree")
        if self.p_m_given.shape != (K, S, Mv):
            raise ValueError("P(M|C,X*) has the wrong shape")
        if max(L, S, K, Mv, Xn) > MAX_ALPHABET:
            raise ValueError(f"alphabets are limited to {MAX_ALPHABET} values")
        e = np.asarray(self.extractor)
        if e.shape != (Xn,) or not np.issubdtype(e.dtype, np.integer):
            raise ValueError("extractor must map every x to an integer x*")
        if e.min() < 0 or e.max() >= S:
            raise ValueError("extractor values outside the X* alphabet")
        self.extractor = e.astype(np.int64)
        # X* = e(X) almost surely: P(x | x*, ...) may only put mass where e(x) = x*.
        off_support = self.extractor[None, :] != np.arange(S)[:, None]  # (S, X)
        if np.any(self.p_x_given * off_support[:, None, None, :] > 0):
            raise ValueError("P(X|X*,C,M) puts mass where e(x) != x*")

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        """(L, S, K, Mv, X)."""
        S, K, Mv, Xn = self.p_x_given.shape
        return len(self.p_y), S, K, Mv, Xn

    @property
    def num_attributes(self) -> int:
        return self.p_c_given_y.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.p_y)

    def joint(self, policy: Optional[InterventionPolicy] = None) -> np.ndarray:
        """Full joint P(y, x*, c, m, x) under ``policy``, shape (L, S, K, Mv, X)."""
        table = (policy or InterventionPolicy.keep_training()).table_for(self.p_c_given_y)
        return (
            self.p_y[:, None, None, None, None]
            * self.p_xstar_given_y[:, :, None, None, None]
            * table[:, None, :, None, None]
            * self.p_m_given.transpose(1, 0, 2)[None, :, :, :, None]
            * self.p_x_given[None, :, :, :, :]
        )

    def joint_yc(self, policy: Optional[InterventionPolicy] = None) -> np.ndarray:
        table = (policy or InterventionPolicy.keep_training()).table_for(self.p_c_given_y)
        return self.p_y[:, None] * table


def as_label_array(h: Hypothesis, num_x: int) -> np.ndarray:
    if callable(h):
        return np.array([int(h(x)) for x in range(num_x)], dtype=np.int64)
    h = np.asarray(h, dtype=np.int64)
    if h.shape != (num_x,):
        raise ValueError(f"hypothesis must assign a label to each of {num_x} x-values")
    return h


def enumerate_and_evaluate(toy: DiscreteDgp, h: Hypothesis,
                           policy: Optional[InterventionPolicy] = None) -> float:
    """Exact 0-1 risk of ``h`` under the policy-induced joint."""
    L, S, K, Mv, Xn = toy.shape
    labels = as_label_array(h, Xn)
    loss = (labels[None, :] != np.arange(L)[:, None]).astype(float)  # (L, X)
    joint = toy.joint(policy)
    return float(np.einsum("yscmx,yx->", joint, loss))


def bayes_xstar_classifier(toy: DiscreteDgp) -> np.ndarray:
    """argmax_y P_perp(Y = y | X* = e(x)), ties to the lowest label, as a label per x."""
    post = toy.p_y[:, None] * toy.p_xstar_given_y      # (L, S), unnormalized
    g = np.argmax(post, axis=0)
    return g[toy.extractor]


def bayes_classifier(toy: DiscreteDgp, policy: Optional[InterventionPolicy] = None) -> np.ndarray:
    """Bayes-optimal label per x under ``policy`` (may use all of x)."""
    p_yx = toy.joint(policy).sum(axis=(1, 2, 3))       # (L, X)
    return np.argmax(p_yx, axis=0)


def all_binary_hypotheses(num_x: int) -> np.ndarray:
    """Every map {0..num_x-1} -> {0, 1}, one per row."""
    codes = np.arange(2 ** num_x)
    return ((codes[:, None] >> np.arange(num_x)[None, :]) & 1).astype(np.int64)


# --- exogenous-noise representation ------------------------------------------

def _breakpoints(cdf_rows: np.ndarray) -> np.ndarray:
    pts = np.concatenate([[0.0, 1.0], np.clip(cdf_rows.ravel(), 0.0, 1.0)])
    return np.unique(pts)


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse CDF for rows ``probs[..., :]`` at uniforms ``u`` (broadcast)."""
    cum = np.cumsum(probs, axis=-1)
    cum[..., -1] = 1.0
    # u = 1 (a midpoint of a sub-ulp grid cell can round there) belongs to the last state
    return np.minimum((u[..., None] >= cum).sum(axis=-1), probs.shape[-1] - 1)


@dataclass
class ExogenousGrid:
    """Cells of the (u_m, u_x) unit square on which every mechanism is constant."""

    u_m: np.ndarray     # midpoints
    w_m: np.ndarray     # widths
    u_x: np.ndarray
    w_x: np.ndarray


def exogenous_grid(toy: DiscreteDgp) -> ExogenousGrid:
    bm = _breakpoints(np.cumsum(toy.p_m_given, axis=-1))
    bx = _breakpoints(np.cumsum(toy.p_x_given, axis=-1))
    return ExogenousGrid(
        u_m=0.5 * (bm[1:] + bm[:-1]), w_m=np.diff(bm),
        u_x=0.5 * (bx[1:] + bx[:-1]), w_x=np.diff(bx),
    )


def structural_x(toy: DiscreteDgp, s, c, u_m, u_x):
    """X and M produced by the structural equations for given parents and noise."""
    s = np.asarray(s)
    c = np.asarray(c)
    m = _inverse_cdf(toy.p_m_given[c, s], np.asarray(u_m))
    x = _inverse_cdf(toy.p_x_given[s, c, m], np.asarray(u_x))
    return x, m


def augmented_risk_exact(toy: DiscreteDgp, h: Hypothesis,
                         policy: Optional[InterventionPolicy] = None) -> float:
    """Population augmented risk with exact counterfactuals.

    Units are drawn from the training joint (under ``policy``); every unit is
    replaced by its K counterfactual copies, each generated from the unit's own
    exogenous noise, and the 0-1 loss is averaged over the copies.
    """
    L, S, K, Mv, Xn = toy.shape
    labels = as_label_array(h, Xn)
    grid = exogenous_grid(toy)
    table = (policy or InterventionPolicy.keep_training()).table_for(toy.p_c_given_y)
    # P(y, x*, c_obs); the factual attribute only decides which copy is "original".
    p_ysc = toy.p_y[:, None, None] * toy.p_xstar_given_y[:, :, None] * table[:, None, :]
    um, ux = np.meshgrid(grid.u_m, grid.u_x, indexing="ij")
    wgt = np.outer(grid.w_m, grid.w_x)
    total = 0.0
    for y in range(L):
        for s in range(S):
            mass_ys = p_ysc[y, s].sum()
            if mass_ys == 0:
                continue
            loss = np.zeros_like(wgt)
            for c in range(K):
                x, _ = structural_x(toy, np.full(um.shape, s), np.full(um.shape, c), um, ux)
                loss += labels[x] != y
            total += mass_ys * float((wgt * loss).sum()) / K
    return total


@dataclass
class ToySample:
    """Units drawn from the toy, with their exact counterfactuals."""

    y: np.ndarray
    x_star: np.ndarray
    c: np.ndarray
    m: np.ndarray
    x: np.ndarray
    x_cf: np.ndarray = field(repr=False)   # (n, K): X(c) for every c

    def __len__(self) -> int:
        return len(self.y)


def sample_toy(toy: DiscreteDgp, n: int, rng: np.random.Generator,
               policy: Optional[InterventionPolicy] = None) -> ToySample:
    L, S, K, Mv, Xn = toy.shape
    table = (policy or InterventionPolicy.keep_training()).table_for(toy.p_c_given_y)
    y = _inverse_cdf(toy.p_y, rng.random(n))
    s = _inverse_cdf(toy.p_xstar_given_y[y], rng.random(n))
    c = _inverse_cdf(table[y], rng.random(n))
    u_m = rng.random(n)
    u_x = rng.random(n)
    x_cf = np.empty((n, K), dtype=np.int64)
    for k in range(K):
        x_cf[:, k], _ = structural_x(toy, s, np.full(n, k), u_m, u_x)
    x, m = structural_x(toy, s, c, u_m, u_x)
    return ToySample(y=y, x_star=s, c=c, m=m, x=x, x_cf=x_cf)


def counterfactual_distribution(toy: DiscreteDgp, c: int) -> np.ndarray:
    """P(X(c)) over the X alphabet (does not depend on the training mechanism)."""
    return toy.joint(InterventionPolicy.do_c(c)).sum(axis=(0, 1, 2, 3))


def pushforward_distribution(toy: DiscreteDgp, tau_c: np.ndarray,
                             policy: Optional[InterventionPolicy] = None) -> np.ndarray:
    """Distribution of tau_c(X, M) for (X, M) ~ training joint.

    ``tau_c`` is an integer array (X, Mv) giving the augmented x for each (x, m).
    """
    L, S, K, Mv, Xn = toy.shape
    tau_c = np.asarray(tau_c, dtype=np.int64)
    if tau_c.shape != (Xn, Mv):
        raise ValueError(f"tau_c must have shape {(Xn, Mv)}")
    p_xm = toy.joint(policy).sum(axis=(0, 1, 2)).T     # (X, Mv)
    out = np.zeros(Xn)
    np.add.at(out, tau_c.ravel(), p_xm.ravel())
    return out


# --- ready-made toys ------------------------------------------------------------

def default_toy() -> DiscreteDgp:
    """|X*| = 2, |C| = 2, |X| = 8 with x = 4*x* + 2*c + noise bit.

    The noise bit depends on x* only, so swapping the c-bit of x is an exact
    counterfactual map.
    """
    S, K, R = 2, 2, 2
    p_noise = np.array([[0.7, 0.3], [0.4, 0.6]])    # P(noise | x*)
    p_x = np.zeros((S, K, 1, S * K * R))
    for s in range(S):
        for c in range(K):
            for r in range(R):
                p_x[s, c, 0, 4 * s + 2 * c + r] = p_noise[s, r]
    return DiscreteDgp(
        p_y=np.array([0.5, 0.5]),
        p_xstar_given_y=np.array([[0.8, 0.2], [0.3, 0.7]]),
        p_c_given_y=np.array([[0.9, 0.1], [0.2, 0.8]]),
        p_x_given=p_x,
        extractor=np.arange(8) // 4,
    )


def default_toy_tau() -> np.ndarray:
    """Exact counterfactual maps for :func:`default_toy`, shape (K, X, 1)."""
    x = np.arange(8)
    s, r = x // 4, x % 2
    return np.stack([(4 * s + 2 * c + r)[:, None] for c in range(2)])


def four_state_toy(p_c_given_y=None) -> DiscreteDgp:
    """|X*| = |C| = 2 and x = 2*x* + c: the smallest model where C shows in X."""
    p_x = np.zeros((2, 2, 1, 4))
    for s in range(2):
        for c in range(2):
            p_x[s, c, 0, 2 * s + c] = 1.0
    return DiscreteDgp(
        p_y=np.array([0.4, 0.6]),
        p_xstar_given_y=np.array([[0.75, 0.25], [0.35, 0.65]]),
        p_c_given_y=np.array([[0.85, 0.15], [0.1, 0.9]]) if p_c_given_y is None else p_c_given_y,
        p_x_given=p_x,
        extractor=np.array([0, 0, 1, 1]),
    )


def random_toy(rng: np.random.Generator, L: int = 2, S: int = 2, K: int = 2,
               Mv: int = 2, R: int = 4) -> DiscreteDgp:
    """Random tables with an auxiliary variable; x = R*x* + residual state."""
    if S * R > MAX_ALPHABET:
        raise ValueError("S * R exceeds the alphabet limit")
    p_x = np.zeros((S, K, Mv, S * R))
    for s in range(S):
        p_x[s, :, :, s * R:(s + 1) * R] = rng.dirichlet(np.ones(R), size=(K, Mv))
    return DiscreteDgp(
        p_y=rng.dirichlet(np.ones(L)),
        p_xstar_given_y=rng.dirichlet(np.ones(S), size=L),
        p_c_given_y=rng.dirichlet(np.ones(K), size=L),
        p_x_given=p_x,
        extractor=np.arange(S * R) // R,
        p_m_given=rng.dirichlet(np.ones(Mv), size=(K, S)),
    )
