"""Gaussian data-generating process with a spuriously correlated attribute.

Each example is ``x = [x*, x_spu]`` with ``x* ~ N(mu_y, sigma^2 I)`` carrying
the label signal and ``x_spu ~ N(mu_c, sigma_spu^2 I)`` carrying only the
attribute. The attribute mechanism P(C | Y) is the only thing interventions
change.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .data import Dataset, LabeledExample
from .policy import InterventionPolicy, check_conditional_table

AUX_LEVELS = 8


class TableSamplingError(RuntimeError):
    pass


def sample_sphere(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    """``n`` points drawn uniformly from the sphere of the given radius."""
    v = rng.standard_normal((n, dim))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class GaussianDgp:
    num_attributes: int
    num_classes: int
    d_star: int
    d_spu: int
    sigma: float
    sigma_spu: float
    mu_y: np.ndarray
    mu_c: np.ndarray
    p_y: np.ndarray
    p_c_given_y: np.ndarray
    class_mean_norm: float
    attr_mean_norm: float
    # Auxiliary channel: x* projected on a fixed direction, quantized to AUX_LEVELS bins.
    aux_projection: np.ndarray = field(default=None)
    aux_edges: np.ndarray = field(default=None)

    def __post_init__(self):
        K, L = self.num_attributes, self.num_classes
        if min(K, L, self.d_star, self.d_spu) < 1:
            raise ValueError("dimensions and cardinalities must be positive")
        if not (self.sigma > 0 and self.sigma_spu > 0):
            raise ValueError("sigma and sigma_spu must be positive")
        self.mu_y = np.asarray(self.mu_y, dtype=float)
        self.mu_c = np.asarray(self.mu_c, dtype=float)
        if self.mu_y.shape != (L, self.d_star) or self.mu_c.shape != (K, self.d_spu):
            raise ValueError("mean arrays have the wrong shape")
        if not np.allclose(np.linalg.norm(self.mu_y, axis=1), self.class_mean_norm, rtol=0, atol=1e-9):
            raise ValueError("class means do not have the configured norm")
        if not np.allclose(np.linalg.norm(self.mu_c, axis=1), self.attr_mean_norm, rtol=0, atol=1e-9):
            raise ValueError("attribute means do not have the configured norm")
        self.p_y = check_conditional_table(self.p_y, "p_y")
        self.p_c_given_y = check_conditional_table(self.p_c_given_y, "p_c_given_y")
        if self.p_y.shape != (L,) or self.p_c_given_y.shape != (L, K):
            raise ValueError("probability tables have the wrong shape")
        if self.aux_projection is None:
            g = np.ones(self.d_star) / math.sqrt(self.d_star)
            self.aux_projection = g
        if self.aux_edges is None:
            self.aux_edges = _aux_edges(self.mu_y, self.aux_projection, self.sigma)

    @property
    def dim(self) -> int:
        return self.d_star + self.d_spu

    @property
    def spurious_slice(self) -> slice:
        return slice(self.d_star, self.d_star + self.d_spu)

    def with_table(self, p_c_given_y) -> "GaussianDgp":
        return dataclasses.replace(self, p_c_given_y=np.asarray(p_c_given_y, dtype=float))

    def joint_table(self, policy: Optional[InterventionPolicy] = None) -> np.ndarray:
        """Population P(Y, C) under ``policy`` (training table by default)."""
        table = (policy or InterventionPolicy.keep_training()).table_for(self.p_c_given_y)
        return self.p_y[:, None] * table

    def aux_summary(self, x_star: np.ndarray) -> np.ndarray:
        return np.digitize(x_star @ self.aux_projection, self.aux_edges).astype(float)


def _aux_edges(mu_y: np.ndarray, g: np.ndarray, sigma: float) -> np.ndarray:
    proj = mu_y @ g
    lo, hi = proj.min() - 3 * sigma, proj.max() + 3 * sigma
    return np.linspace(lo, hi, AUX_LEVELS + 1)[1:-1]


def make_gaussian_dgp(
    rng: np.random.Generator,
    num_attributes: int = 8,
    num_classes: int = 2,
    d_star: int = 10,
    d_spu: int = 300,
    sigma: float = 0.1,
    sigma_spu: float = math.sqrt(0.05),
    class_mean_norm: float = 1 / 3,
    attr_mean_norm: float = 60.0,
) -> GaussianDgp:
    if class_mean_norm <= 0 or attr_mean_norm <= 0:
        raise ValueError("mean norms must be positive")
    mu_y = sample_sphere(rng, num_classes, d_star, class_mean_norm)
    mu_c = sample_sphere(rng, num_attributes, d_spu, attr_mean_norm)
    g = sample_sphere(rng, 1, d_star, 1.0)[0]
    return GaussianDgp(
        num_attributes=num_attributes,
        num_classes=num_classes,
        d_star=d_star,
        d_spu=d_spu,
        sigma=sigma,
        sigma_spu=sigma_spu,
        mu_y=mu_y,
        mu_c=mu_c,
        p_y=np.full(num_classes, 1.0 / num_classes),
        p_c_given_y=np.full((num_classes, num_attributes), 1.0 / num_attributes),
        class_mean_norm=class_mean_norm,
        attr_mean_norm=attr_mean_norm,
        aux_projection=g,
    )


def build_default_gaussian_dgp(seed: int, class_mean_norm: float = 1 / 3,
                               attr_mean_norm: float = 60.0) -> GaussianDgp:
    """The synthetic study's setup: K=8, L=2, d*=10, d_spu=300.

    sigma = 0.01 * d* and sigma_spu^2 = 0.05; P(C | Y) starts uniform and is
    normally replaced via :func:`sample_correlated_table`.
    """
    d_star = 10
    return make_gaussian_dgp(
        np.random.default_rng(seed),
        num_attributes=8,
        num_classes=2,
        d_star=d_star,
        d_spu=300,
        sigma=0.01 * d_star,
        sigma_spu=math.sqrt(0.05),
        class_mean_norm=class_mean_norm,
        attr_mean_norm=attr_mean_norm,
    )


# --- P(C | Y) sampling -------------------------------------------------------

def _mi_batch(p_y: np.ndarray, tables: np.ndarray, base: float) -> np.ndarray:
    joint = p_y[None, :, None] * tables
    p_c = joint.sum(axis=1, keepdims=True)
    prod = p_y[None, :, None] * p_c
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(joint / prod), 0.0)
    return terms.sum(axis=(1, 2)) / math.log(base)


def _dirichlet_batch(rng, alpha: float, n: int, L: int, K: int) -> np.ndarray:
    g = rng.standard_gamma(alpha, size=(n, L, K))
    s = g.sum(axis=2, keepdims=True)
    # Tiny alphas can underflow a whole row to zero; such a row is a point mass.
    bad = s[..., 0] == 0
    if np.any(bad):
        idx = np.argwhere(bad)
        g[idx[:, 0], idx[:, 1], :] = 0.0
        g[idx[:, 0], idx[:, 1], rng.integers(0, K, len(idx))] = 1.0
        s = g.sum(axis=2, keepdims=True)
    return g / s


ALPHA_RULES = ("flat", "median")


def _median_alpha(p_y, K, target, base, rng, probe_draws=64) -> float:
    L = len(p_y)
    log_a, log_b = math.log(1e-4), math.log(1e12)
    for _ in range(60):
        mid = 0.5 * (log_a + log_b)
        tables = _dirichlet_batch(rng, math.exp(mid), probe_draws, L, K)
        if np.median(_mi_batch(p_y, tables, base)) > target:
            log_a = mid
        else:
            log_b = mid
    return math.exp(0.5 * (log_a + log_b))


def _acceptance(p_y, K, alpha, lo, hi, base, rng, draws) -> float:
    mi = _mi_batch(p_y, _dirichlet_batch(rng, alpha, draws, len(p_y), K), base)
    return float(np.mean((mi >= lo) & (mi <= hi)))


@functools.lru_cache(maxsize=256)
def _select_alpha_cached(p_y: tuple, K: int, lo: float, hi: float, base: float,
                         rule: str, max_attempts: int) -> float:
    p_y = np.array(p_y)
    cap = math.log(min(K, len(p_y))) / math.log(base)
    target = 0.5 * (lo + min(hi, cap))
    # The search has its own fixed stream so it never perturbs callers' draws.
    rng = np.random.default_rng(20240601)
    a_med = _median_alpha(p_y, K, target, base, rng)
    if rule == "median":
        return a_med
    need = 10.0 / max_attempts
    draws = int(min(max(20 / need, 10_000), 400_000))
    if _acceptance(p_y, K, 1.0, lo, hi, base, rng, draws) >= need:
        return 1.0
    if a_med >= 1.0:
        return a_med
    log_a, log_b = math.log(a_med), 0.0
    for _ in range(12):
        mid = 0.5 * (log_a + log_b)
        if _acceptance(p_y, K, math.exp(mid), lo, hi, base, rng, draws) >= need:
            log_a = mid
        else:
            log_b = mid
    return math.exp(log_a)


def select_dirichlet_alpha(p_y, num_attributes: int, mi_interval, base: float = math.e,
                           rule: str = "flat", max_attempts: int = 100_000) -> float:
    """Concentration for the Dirichlet rows of P(C | Y).

    ``median`` bisects alpha (in log space) so the median MI of random
    tables sits at the interval midpoint. ``flat`` prefers alpha = 1, the
    uniform distribution on the simplex, and lowers alpha only as far as
    needed for at least 10 expected hits within the attempt budget; the
    search runs between the median-rule alpha and 1.
    """
    if rule not in ALPHA_RULES:
        raise ValueError(f"alpha rule must be one of {ALPHA_RULES}")
    return _select_alpha_cached(tuple(float(v) for v in p_y), int(num_attributes),
                                float(mi_interval[0]), float(mi_interval[1]), float(base),
                                rule, int(max_attempts))


def sample_correlated_table(
    dgp: GaussianDgp,
    mi_interval,
    rng: np.random.Generator,
    base: float = math.e,
    max_attempts: int = 100_000,
    alpha: Union[str, float] = "flat",
) -> np.ndarray:
    """Draw P(C | Y) whose induced I(Y; C) lies in ``mi_interval``.

    Rows are Dirichlet(alpha * 1) draws, rejection-sampled until the MI
    lands in the interval. ``alpha`` is a number or a rule name for
    :func:`select_dirichlet_alpha`. ``base`` sets the MI unit (e for nats,
    2 for bits).
    """
    lo, hi = float(mi_interval[0]), float(mi_interval[1])
    L, K = dgp.num_classes, dgp.num_attributes
    cap = math.log(min(K, L)) / math.log(base)
    if not (0 <= lo < hi) or lo > cap:
        raise ValueError(f"MI interval [{lo}, {hi}] is infeasible (max {cap:.4f})")
    if isinstance(alpha, str):
        alpha = select_dirichlet_alpha(dgp.p_y, K, (lo, hi), base, alpha, max_attempts)
    elif not alpha > 0:
        raise ValueError("alpha must be positive")

    batch = 256
    tried = 0
    while tried < max_attempts:
        n = min(batch, max_attempts - tried)
        tables = _dirichlet_batch(rng, alpha, n, L, K)
        mi = _mi_batch(dgp.p_y, tables, base)
        ok = np.flatnonzero((mi >= lo) & (mi <= hi))
        if len(ok):
            return tables[ok[0]]
        tried += n
    raise TableSamplingError(
        f"no P(C|Y) with I(Y;C) in [{lo}, {hi}] after {max_attempts} Dirichlet draws "
        f"(alpha={alpha:.4g}, K={K}, L={L})"
    )


# --- sampling -----------------------------------------------------------------

def _draw_categorical(rng, probs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(len(rows))
    return (u[:, None] >= cum[rows]).sum(axis=1)


def sample_dataset(dgp: GaussianDgp, n: int, policy: Optional[InterventionPolicy] = None,
                   rng: Optional[np.random.Generator] = None) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    if rng is None:
        raise ValueError("an explicit rng is required")
    policy = policy or InterventionPolicy.keep_training()
    table = policy.table_for(dgp.p_c_given_y)
    y = _draw_categorical(rng, dgp.p_y[None, :], np.zeros(n, dtype=int))
    c = _draw_categorical(rng, table, y)
    x_star = dgp.mu_y[y] + dgp.sigma * rng.standard_normal((n, dgp.d_star))
    x_spu = dgp.mu_c[c] + dgp.sigma_spu * rng.standard_normal((n, dgp.d_spu))
    return Dataset(
        X=np.hstack([x_star, x_spu]),
        y=y,
        c=c,
        num_classes=dgp.num_classes,
        num_attributes=dgp.num_attributes,
        m=dgp.aux_summary(x_star)[:, None],
    )


def sample_panel_dataset(dgp: GaussianDgp, n: int, rng: np.random.Generator,
                         policy: Optional[InterventionPolicy] = None) -> Dataset:
    """Two-period panels obeying the constant-effect assumption exactly.

    The pre-treatment attribute ``c_pre`` is uniform; ``x_pre`` shares the x*
    block with ``x`` and has its spurious block centred at ``mu[c_pre]``.
    Then ``x = x_pre + (0; mu[c] - mu[c_pre])``. ``m = (c_pre, aux)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    policy = policy or InterventionPolicy.keep_training()
    table = policy.table_for(dgp.p_c_given_y)
    K = dgp.num_attributes
    y = _draw_categorical(rng, dgp.p_y[None, :], np.zeros(n, dtype=int))
    c = _draw_categorical(rng, table, y)
    c_pre = rng.integers(0, K, n)
    x_star = dgp.mu_y[y] + dgp.sigma * rng.standard_normal((n, dgp.d_star))
    spu_pre = dgp.mu_c[c_pre] + dgp.sigma_spu * rng.standard_normal((n, dgp.d_spu))
    x_pre = np.hstack([x_star, spu_pre])
    X = x_pre + treatment_effect(dgp, c, c_pre)
    m = np.column_stack([c_pre.astype(float), dgp.aux_summary(x_star)])
    return Dataset(X=X, y=y, c=c, num_classes=dgp.num_classes, num_attributes=K, m=m, x_pre=x_pre)


def treatment_effect(dgp: GaussianDgp, c, c_pre) -> np.ndarray:
    """rho(c, m) = (0; mu[c] - mu[c_pre]) for arrays of attribute pairs."""
    c = np.atleast_1d(c)
    c_pre = np.atleast_1d(c_pre)
    out = np.zeros((len(c), dgp.dim))
    out[:, dgp.spurious_slice] = dgp.mu_c[c] - dgp.mu_c[c_pre]
    return out


def oracle_counterfactual(dgp: GaussianDgp, ex: LabeledExample, c_target: int) -> np.ndarray:
    if not 0 <= c_target < dgp.num_attributes:
        raise ValueError(f"c_target {c_target} outside [0, {dgp.num_attributes})")
    x = np.asarray(ex.x, dtype=float)
    if x.shape != (dgp.dim,):
        raise ValueError(f"example has dimension {x.shape}, DGP expects ({dgp.dim},)")
    out = x.copy()
    if c_target != ex.c:
        out[dgp.spurious_slice] += dgp.mu_c[c_target] - dgp.mu_c[ex.c]
    return out


def oracle_counterfactuals(dgp: GaussianDgp, ds: Dataset) -> np.ndarray:
    """All K exact counterfactuals of every example, shape (n, K, d)."""
    if ds.dim != dgp.dim:
        raise ValueError(f"dataset dimension {ds.dim} does not match DGP ({dgp.dim})")
    out = np.repeat(ds.X[:, None, :], dgp.num_attributes, axis=1)
    shift = dgp.mu_c[None, :, :] - dgp.mu_c[ds.c][:, None, :]
    out[:, :, dgp.spurious_slice] += shift
    # Keep the observed vector bit-for-bit at the factual attribute.
    out[np.arange(len(ds)), ds.c] = ds.X
    return out
