"""Linear classifiers and their flat-text serialization."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


def score_width(num_classes: int) -> int:
    """Binary problems use one logit; L > 2 uses one score per class."""
    return 1 if num_classes == 2 else num_classes


@dataclass
class LinearModel:
    W: np.ndarray           # (score_width, dim)
    b: np.ndarray           # (score_width,)
    num_classes: int

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        width = score_width(self.num_classes)
        if self.W.shape[0] != width or self.b.shape != (width,):
            raise ValueError(f"{self.num_classes} classes need {width} score rows")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("model has non-finite entries")

    @classmethod
    def zeros(cls, dim: int, num_classes: int) -> "LinearModel":
        w = score_width(num_classes)
        return cls(np.zeros((w, dim)), np.zeros(w), num_classes)

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise ValueError(f"inputs have dimension {X.shape[-1]}, model expects {self.dim}")
        return X @ self.W.T + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self.scores(X)
        if Z.shape[1] == 1:
            return (Z[:, 0] > 0).astype(np.int64)
        return np.argmax(Z, axis=1)

    def to_params(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    @classmethod
    def from_params(cls, theta: np.ndarray, dim: int, num_classes: int) -> "LinearModel":
        w = score_width(num_classes)
        theta = np.asarray(theta, dtype=float)
        return cls(theta[: w * dim].reshape(w, dim), theta[w * dim:], num_classes)

    def to_text(self) -> str:
        lines = [str(self.dim), str(self.num_classes)]
        lines += [repr(float(v)) for v in self.W.ravel()]
        lines += [repr(float(v)) for v in self.b]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LinearModel":
        vals = text.split()
        dim, L = int(vals[0]), int(vals[1])
        w = score_width(L)
        nums = np.array([float(v) for v in vals[2:]])
        if len(nums) != w * dim + w:
            raise ValueError(f"expected {w * dim + w} parameters, found {len(nums)}")
        return cls.from_params(nums, dim, L)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "LinearModel":
        return cls.from_text(Path(path).read_text())
