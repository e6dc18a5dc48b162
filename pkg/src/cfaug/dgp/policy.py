"""Interventions on the attribute mechanism P(C | Y)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

_VARIANTS = ("keep_training", "uniform_c", "fixed_table", "do_c")


def check_conditional_table(table: np.ndarray, name: str = "table", atol: float = 1e-12) -> np.ndarray:
    table = np.asarray(table, dtype=float)
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise ValueError(f"{name} has negative or non-finite entries")
    sums = table.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > atol):
        raise ValueError(f"{name} rows do not sum to 1 (max error {np.abs(sums - 1).max():.3g})")
    return table


@dataclass(frozen=True)
class InterventionPolicy:
    """Which P(C | Y) to sample from.

    ``keep_training`` uses the DGP's own table, ``uniform_c`` is the
    unconfounded distribution (C uniform and independent of Y),
    ``fixed_table`` substitutes ``table`` and ``do_c`` pins C to ``value``.
    """

    variant: str = "keep_training"
    table: Optional[np.ndarray] = None
    value: Optional[int] = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown policy variant {self.variant!r}")
        if self.variant == "fixed_table":
            if self.table is None:
                raise ValueError("fixed_table policy needs a table")
            object.__setattr__(self, "table", check_conditional_table(self.table, "policy table"))
        if self.variant == "do_c" and (self.value is None or self.value < 0):
            raise ValueError("do_c policy needs a nonnegative attribute value")

    @classmethod
    def keep_training(cls) -> "InterventionPolicy":
        return cls("keep_training")

    @classmethod
    def uniform_c(cls) -> "InterventionPolicy":
        return cls("uniform_c")

    @classmethod
    def fixed(cls, table) -> "InterventionPolicy":
        return cls("fixed_table", table=np.asarray(table, dtype=float))

    @classmethod
    def do_c(cls, value: int) -> "InterventionPolicy":
        return cls("do_c", value=int(value))

    def table_for(self, training_table: np.ndarray) -> np.ndarray:
        """The L x K table P(C | Y) this policy induces."""
        training_table = np.asarray(training_table, dtype=float)
        L, K = training_table.shape
        if self.variant == "keep_training":
            return training_table
        if self.variant == "uniform_c":
            return np.full((L, K), 1.0 / K)
        if self.variant == "fixed_table":
            if self.table.shape != (L, K):
                raise ValueError(f"policy table has shape {self.table.shape}, expected {(L, K)}")
            return self.table
        if self.value >= K:
            raise ValueError(f"do_c({self.value}) outside [0, {K})")
        out = np.zeros((L, K))
        out[:, self.value] = 1.0
        return out
