"""Template-based synthetic reviews for desk-scale runs.

Each aspect the reviewer mentions contributes one sentence built from an
aspect noun and a sentiment adjective. How many aspects a reviewer mentions
is a per-reviewer trait (conciseness), independent of the rating. An
overall-verdict sentence is included only sometimes, so the label is not
trivially readable from the text.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reviews import ASPECTS, Review

NOUNS = {
    "food": ("pasta", "sushi", "steak", "tacos", "salad", "dumplings", "curry", "risotto"),
    "service": ("waiter", "server", "staff", "host"),
    "noise": ("room", "music", "dining hall", "bar area"),
    "ambiance": ("decor", "lighting", "patio", "interior"),
}
ADJECTIVES = {
    "food": {"positive": ("delicious", "flavorful", "perfectly cooked", "fresh"),
             "negative": ("bland", "overcooked", "greasy", "stale")},
    "service": {"positive": ("attentive", "friendly", "quick", "welcoming"),
                "negative": ("rude", "slow", "careless", "dismissive")},
    "noise": {"positive": ("quiet", "calm", "peaceful", "relaxed"),
              "negative": ("loud", "deafening", "chaotic", "noisy")},
    "ambiance": {"positive": ("cozy", "charming", "elegant", "inviting"),
                 "negative": ("drab", "gloomy", "cramped", "tired")},
}
PLURAL_NOUNS = ("tacos", "dumplings")
VERDICTS = {
    1: ("A terrible experience.", "Never coming back."),
    2: ("It was a letdown overall.", "Probably would not return."),
    3: ("It was decent overall.", "Fine for a weeknight."),
    4: ("We had a really good time.", "Would happily come back."),
    5: ("Absolutely loved this place.", "One of our favorite spots."),
}
FILLER = ("We came here on a weekday.", "We visited with some friends.",
          "We stopped by after work.", "We went for a birthday dinner.")
# P(aspect opinion is positive | overall rating)
POSITIVE_RATE = {1: 0.1, 2: 0.25, 3: 0.6, 4: 0.8, 5: 0.9}


@dataclass(frozen=True)
class SyntheticReviewConfig:
    overall_probs: tuple = (0.12, 0.16, 0.2, 0.28, 0.24)
    mention_low: float = 0.2
    mention_high: float = 0.95
    verdict_prob: float = 0.35
    filler_prob: float = 0.5


def aspect_sentence(aspect: str, sentiment: str, rng: np.random.Generator) -> str:
    noun = NOUNS[aspect][rng.integers(len(NOUNS[aspect]))]
    adj = ADJECTIVES[aspect][sentiment][rng.integers(4)]
    verb = "were" if noun in PLURAL_NOUNS else "was"
    return f"The {noun} {verb} {adj}."


def generate_reviews(n: int, rng: np.random.Generator,
                     cfg: SyntheticReviewConfig = SyntheticReviewConfig(),
                     id_prefix: str = "r") -> list[Review]:
    out = []
    for k in range(n):
        overall = int(rng.choice(5, p=np.asarray(cfg.overall_probs) / sum(cfg.overall_probs))) + 1
        mention_p = rng.uniform(cfg.mention_low, cfg.mention_high)
        sentences, ratings, latent = [], {}, {}
        if rng.random() < cfg.filler_prob:
            sentences.append(FILLER[rng.integers(len(FILLER))])
        for a in ASPECTS:
            latent[a] = "positive" if rng.random() < POSITIVE_RATE[overall] else "negative"
            if rng.random() < mention_p:
                ratings[a] = latent[a]
                sentences.append(aspect_sentence(a, latent[a], rng))
            else:
                ratings[a] = "unknown"
        if rng.random() < cfg.verdict_prob:
            sentences.append(VERDICTS[overall][rng.integers(2)])
        out.append(Review(f"{id_prefix}{k}", " ".join(sentences), overall,
                          ratings["food"], ratings["service"], ratings["noise"],
                          ratings["ambiance"], food_original=latent["food"]))
    return out
