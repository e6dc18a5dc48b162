"""Labeled datasets and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np


@dataclass(frozen=True)
class LabeledExample:
    x: np.ndarray
    y: int
    c: int
    m: Optional[np.ndarray] = None
    x_pre: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.x_pre is not None and self.x_pre.shape != self.x.shape:
            raise ValueError("x_pre must have the same dimension as x")


@dataclass
class Dataset:
    """Column-oriented collection of labeled examples.

    Rows are examples. ``m`` and ``x_pre`` are optional and, when present,
    have one row per example.
    """

    X: np.ndarray
    y: np.ndarray
    c: np.ndarray
    num_classes: int
    num_attributes: int
    m: Optional[np.ndarray] = None
    x_pre: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.c = np.asarray(self.c, dtype=np.int64)
        n = len(self.y)
        if self.X.ndim != 2 or self.X.shape[0] != n or len(self.c) != n:
            raise ValueError("X, y and c must have matching first dimension")
        if n and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise ValueError("labels out of range [0, L)")
        if n and (self.c.min() < 0 or self.c.max() >= self.num_attributes):
            raise ValueError("attributes out of range [0, K)")
        if self.m is not None:
            self.m = np.asarray(self.m, dtype=float)
            if self.m.ndim == 1:
                self.m = self.m[:, None]
            if self.m.shape[0] != n:
                raise ValueError("m must have one row per example")
        if self.x_pre is not None:
            self.x_pre = np.asarray(self.x_pre, dtype=float)
            if self.x_pre.shape != self.X.shape:
                raise ValueError("x_pre must have the same shape as X")

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(
            x=self.X[i],
            y=int(self.y[i]),
            c=int(self.c[i]),
            m=None if self.m is None else self.m[i],
            x_pre=None if self.x_pre is None else self.x_pre[i],
        )

    def __iter__(self) -> Iterator[LabeledExample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            X=self.X[idx],
            y=self.y[idx],
            c=self.c[idx],
            num_classes=self.num_classes,
            num_attributes=self.num_attributes,
            m=None if self.m is None else self.m[idx],
            x_pre=None if self.x_pre is None else self.x_pre[idx],
        )

    @classmethod
    def from_examples(cls, examples, num_classes: int, num_attributes: int) -> "Dataset":
        examples = list(examples)
        if not examples:
            raise ValueError("no examples")
        has_m = examples[0].m is not None
        has_pre = examples[0].x_pre is not None
        return cls(
            X=np.stack([e.x for e in examples]),
            y=np.array([e.y for e in examples]),
            c=np.array([e.c for e in examples]),
            num_classes=num_classes,
            num_attributes=num_attributes,
            m=np.stack([e.m for e in examples]) if has_m else None,
            x_pre=np.stack([e.x_pre for e in examples]) if has_pre else None,
        )


def _fmt(v: float) -> str:
    # repr() of a Python float is the shortest string that round-trips exactly.
    return repr(float(v))


def dataset_header(ds: Dataset) -> list[str]:
    cols = ["idx", "y", "c"] + [f"x_{j}" for j in range(ds.dim)]
    if ds.m is not None:
        cols += [f"m_{j}" for j in range(ds.m.shape[1])]
    if ds.x_pre is not None:
        cols += [f"xpre_{j}" for j in range(ds.dim)]
    return cols


def dataset_rows(ds: Dataset):
    for i in range(len(ds)):
        row = [str(i), str(int(ds.y[i])), str(int(ds.c[i]))]
        row += [_fmt(v) for v in ds.X[i]]
        if ds.m is not None:
            row += [_fmt(v) for v in ds.m[i]]
        if ds.x_pre is not None:
            row += [_fmt(v) for v in ds.x_pre[i]]
        yield row


def write_dataset_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(dataset_header(ds))
        w.writerows(dataset_rows(ds))


def _columns(header: list[str], prefix: str) -> list[int]:
    cols = [(int(h[len(prefix):]), j) for j, h in enumerate(header) if h.startswith(prefix)]
    return [j for _, j in sorted(cols)]


def read_dataset_csv(path, num_classes: Optional[int] = None,
                     num_attributes: Optional[int] = None) -> Dataset:
    """Read a dataset written by :func:`write_dataset_csv`.

    ``num_classes``/``num_attributes`` default to ``max + 1`` of the stored
    labels, which under-counts when the top values are absent; pass them
    explicitly when known.
    """
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    for needed in ("idx", "y", "c"):
        if needed not in header:
            raise ValueError(f"{path}: missing column {needed!r}")
    table = np.array(rows, dtype=object) if rows else np.empty((0, len(header)), dtype=object)
    y = table[:, header.index("y")].astype(np.int64)
    c = table[:, header.index("c")].astype(np.int64)
    xc = _columns(header, "x_")
    mc = _columns(header, "m_")
    pc = _columns(header, "xpre_")
    X = table[:, xc].astype(float)
    return Dataset(
        X=X,
        y=y,
        c=c,
        num_classes=num_classes if num_classes is not None else int(y.max()) + 1,
        num_attributes=num_attributes if num_attributes is not None else int(c.max()) + 1,
        m=table[:, mc].astype(float) if mc else None,
        x_pre=table[:, pc].astype(float) if pc else None,
    )
