"""Restaurant reviews with aspect sub-ratings, and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

ASPECTS = ("food", "service", "noise", "ambiance")
SUBRATINGS = ("negative", "positive", "unknown")
COLUMNS = ("id", "text", "overall", "food", "service", "noise", "ambiance")
OPTIONAL_COLUMNS = ("food_original", "source_id")


class SchemaError(ValueError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class Review:
    """One review.

    ``food`` is the perceived food sub-rating (what the text says);
    ``food_original`` is the reviewer's own food opinion, which the text may
    leave unmentioned. It defaults to the perceived rating.
    """

    id: str
    text: str
    overall: int
    food: str
    service: str
    noise: str
    ambiance: str
    food_original: Optional[str] = None
    source_id: Optional[str] = None
    label: int = field(init=False)
    food_mention: int = field(init=False)

    def __post_init__(self):
        if not 1 <= int(self.overall) <= 5:
            raise ValueError(f"overall rating {self.overall} outside 1..5")
        object.__setattr__(self, "overall", int(self.overall))
        for a in ASPECTS:
            if getattr(self, a) not in SUBRATINGS:
                raise ValueError(f"{a} sub-rating {getattr(self, a)!r} not in {SUBRATINGS}")
        if self.food_original is None:
            object.__setattr__(self, "food_original", self.food)
        elif self.food_original not in SUBRATINGS:
            raise ValueError(f"food_original {self.food_original!r} not in {SUBRATINGS}")
        object.__setattr__(self, "label", binary_label(self.overall))
        object.__setattr__(self, "food_mention", food_mention(self.food))

    @property
    def ratings(self) -> dict:
        return {a: getattr(self, a) for a in ASPECTS}


def binary_label(overall: int) -> int:
    return int(overall >= 3)


def food_mention(food: str) -> int:
    return int(food in ("negative", "positive"))


def ingest_reviews(path) -> list[Review]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(1, f"missing columns {missing}")
        for k, row in enumerate(reader, start=2):
            try:
                overall = int(row["overall"])
                extra = {c: (row.get(c) or None) for c in OPTIONAL_COLUMNS}
                out.append(Review(row["id"], row["text"], overall,
                                  *(row[a] for a in ASPECTS), **extra))
            except (ValueError, TypeError) as exc:
                raise SchemaError(k, str(exc)) from exc
    return out


def write_reviews(reviews, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS + OPTIONAL_COLUMNS)
        for r in reviews:
            w.writerow([r.id, r.text, r.overall, r.food, r.service, r.noise, r.ambiance,
                        r.food_original, r.source_id or ""])
