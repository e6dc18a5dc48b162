"""Generalization bounds for reweighted and augmented training.

A :class:`BoundReport` holds summed terms shared by every variant plus
variant-specific extra terms. The augmentation bound carries two variants
that differ only in how lambda_aug is defined:

* ``excess``: R_perp(h*_aug) - R_perp(h*)
* ``joint``: R_aug(h*) + R_perp(h*)
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .tables import importance_divergence, renyi_dependence

LAMBDA_VARIANTS = ("excess", "joint")


def _check_term(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"bound term {name} must be finite and nonnegative, got {value}")
    return value


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


@dataclass
class BoundReport:
    kind: str
    n: int
    delta: float
    terms: dict                                    # summed in every variant
    variants: dict = field(default_factory=dict)   # variant -> extra summed terms
    info: dict = field(default_factory=dict)       # reported, not summed

    def __post_init__(self):
        for k, v in self.terms.items():
            self.terms[k] = _check_term(k, v)
        for var, extra in self.variants.items():
            for k, v in extra.items():
                extra[k] = _check_term(f"{var}.{k}", v)
        if not self.variants:
            self.variants = {"default": {}}

    def total(self, variant: str = None) -> float:
        variant = variant or next(iter(self.variants))
        return float(sum(self.terms.values()) + sum(self.variants[variant].values()))

    @property
    def totals(self) -> dict:
        return {v: self.total(v) for v in self.variants}

    def rows(self) -> list[dict]:
        """One flat record per variant."""
        out = []
        for var, extra in self.variants.items():
            row = {"bound": self.kind, "variant": var, "n": self.n, "delta": self.delta}
            row.update(self.terms)
            row.update(extra)
            row.update(self.info)
            row["total"] = self.total(var)
            out.append(row)
        return out

    def to_csv(self) -> str:
        rows = self.rows()
        fields = list(dict.fromkeys(k for r in rows for k in r))
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in fields})
        return buf.getvalue()

    def to_kv(self) -> str:
        lines = [f"bound={self.kind}", f"n={self.n}", f"delta={_fmt(self.delta)}"]
        lines += [f"{k}={_fmt(v)}" for k, v in self.terms.items()]
        lines += [f"{k}={_fmt(v)}" for k, v in self.info.items()]
        for var, extra in self.variants.items():
            lines += [f"{var}.{k}={_fmt(v)}" for k, v in extra.items()]
            lines.append(f"{var}.total={_fmt(self.total(var))}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


RENYI_DIRECTIONS = ("importance", "dependence")


def renyi_bound(empirical_weighted_risk: float, jt, n: int, delta: float,
                direction: str = "importance") -> BoundReport:
    """R_w + sqrt(2 d_2 log(1/delta) / N) + d_inf log(1/delta) / N.

    ``direction="importance"`` takes d_alpha(P(Y)P(C) || P(Y, C)), the
    divergence that bounds the moments of the importance weights.
    ``"dependence"`` takes d_alpha(P(Y, C) || P(Y)P(C)) instead; it is smaller
    under strong correlation and does not always dominate the target risk.
    """
    _check_delta(delta)
    if n < 1:
        raise ValueError("n must be at least 1")
    if direction not in RENYI_DIRECTIONS:
        raise ValueError(f"direction must be one of {RENYI_DIRECTIONS}")
    div = importance_divergence if direction == "importance" else renyi_dependence
    d2 = div(jt, 2)
    dinf = div(jt, math.inf)
    if not math.isfinite(dinf):
        raise ValueError("a (y, c) cell has zero training mass; importance weights are unbounded")
    log_term = math.log(1.0 / delta)
    terms = {
        "empirical": empirical_weighted_risk,
        "concentration": math.sqrt(2.0 * d2 * log_term / n),
        "dependence": dinf * log_term / n,
    }
    return BoundReport("renyi", n, delta, terms, info={"direction": direction, "d2": d2, "d_inf": dinf})


def lambda_aug_excess(risk_perp_h_aug_star: float, risk_perp_h_star: float) -> float:
    return float(risk_perp_h_aug_star - risk_perp_h_star)


def lambda_aug_joint(risk_aug_h_star: float, risk_perp_h_star: float) -> float:
    return float(risk_aug_h_star + risk_perp_h_star)


def aug_bound(empirical_aug_risk: float, divergences, n: int, delta: float,
              risk_perp_h_star: float, risk_perp_h_aug_star: float,
              risk_aug_h_star: float) -> BoundReport:
    """R_aug + sqrt(log(1/delta) / N) + mean_c TV_c + lambda_aug, both lambda variants."""
    _check_delta(delta)
    if n < 1:
        raise ValueError("n must be at least 1")
    div = np.asarray(divergences, dtype=float)
    if div.ndim != 1 or len(div) == 0 or np.any(div < 0) or np.any(div > 1) or not np.all(np.isfinite(div)):
        raise ValueError("divergences must be K values in [0, 1]")
    terms = {
        "empirical": empirical_aug_risk,
        "concentration": math.sqrt(math.log(1.0 / delta) / n),
        "divergence": float(div.mean()),
    }
    variants = {
        "excess": {"lambda_aug": lambda_aug_excess(risk_perp_h_aug_star, risk_perp_h_star)},
        "joint": {"lambda_aug": lambda_aug_joint(risk_aug_h_star, risk_perp_h_star)},
    }
    return BoundReport("aug", n, delta, terms, variants)
