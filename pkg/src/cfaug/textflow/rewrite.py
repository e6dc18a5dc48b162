"""Prompt assembly, review matching and the rewriter boundary."""
from __future__ import annotations

import json
import re
import time
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Optional, Protocol

import numpy as np

from .reviews import ASPECTS, Review
from .synthetic import NOUNS

TEMPLATE_VERSION = "v1"
MODES = ("conditional", "counterfactual", "naive")
_PROMPT_ORDER = ("ambiance", "food", "noise", "service")


@lru_cache(maxsize=None)
def prompt_template(version: str = TEMPLATE_VERSION) -> str:
    return (resources.files("cfaug.textflow") / "assets" / f"rewrite_prompt_{version}.txt").read_text()


def assemble_prompt(original: Review, comparator: Review, version: str = TEMPLATE_VERSION) -> str:
    fields = {"original_review": original.text, "compare_review": comparator.text}
    for a in _PROMPT_ORDER:
        fields[f"original_{a}"] = getattr(original, a)
        fields[f"compare_{a}"] = getattr(comparator, a)
    return Template(prompt_template(version)).substitute(fields)


_INPUT_RE = re.compile(
    r"---- INPUT - START -----\n\noriginal_review: \[(?P<orig>.*?)\],\noriginal_ratings: \["
    r".*?compare_reviews:\[(?P<comp>.*?)\]\ncompare_ratings:\[", re.S)


def parse_prompt(prompt: str) -> tuple[str, str]:
    """Recover (original text, comparator text) from an assembled prompt."""
    m = _INPUT_RE.search(prompt)
    if m is None:
        raise ValueError("prompt does not follow the rewrite template")
    return m.group("orig"), m.group("comp")


@dataclass(frozen=True)
class RewriteRequest:
    index: int
    mode: str
    original: Review
    comparator: Review
    prompt: str


@dataclass(frozen=True)
class AssembleConfig:
    per_review: int = 1
    naive_count: Optional[int] = None   # naive mode: number of random pairs (default pool size)

    def __post_init__(self):
        if self.per_review < 1:
            raise ValueError("per_review must be positive")


def _key(r: Review, mode: str):
    if mode == "conditional":
        return (r.overall,) + tuple(getattr(r, a) for a in ASPECTS)
    return (r.overall, r.food_original)


def match_and_assemble(reviews, mode: str, cfg: AssembleConfig = AssembleConfig(),
                       rng: Optional[np.random.Generator] = None) -> tuple[list[RewriteRequest], int]:
    """Pair each review with comparators and build rewrite prompts.

    ``conditional`` pairs reviews with identical overall and perceived
    sub-ratings. ``counterfactual`` pairs reviews with equal overall and
    original food ratings but a different food mention. ``naive`` pairs
    random reviews. Within a match group comparators are taken cyclically
    after the review's own position. Returns the requests and the number
    of reviews left without a match.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    reviews = list(reviews)
    pairs = []
    unmatched = 0
    if mode == "naive":
        if rng is None:
            raise ValueError("naive pairing needs an rng")
        count = len(reviews) if cfg.naive_count is None else cfg.naive_count
        if len(reviews) >= 2:
            for _ in range(count):
                i, j = rng.choice(len(reviews), 2, replace=False)
                pairs.append((int(i), int(j)))
        else:
            unmatched = len(reviews)
    else:
        groups: dict = {}
        for i, r in enumerate(reviews):
            groups.setdefault(_key(r, mode), []).append(i)
        for i, r in enumerate(reviews):
            group = groups[_key(r, mode)]
            if mode == "conditional":
                cands = group
            else:
                cands = [j for j in group if reviews[j].food_mention != r.food_mention]
                cands = sorted(cands + [i])
            start = cands.index(i)
            chosen = [cands[(start + s) % len(cands)] for s in range(1, len(cands))][: cfg.per_review]
            if not chosen:
                unmatched += 1
            pairs += [(i, j) for j in chosen]
    requests = [RewriteRequest(k, mode, reviews[i], reviews[j], assemble_prompt(reviews[i], reviews[j]))
                for k, (i, j) in enumerate(pairs)]
    return requests, unmatched


class Rewriter(Protocol):
    deterministic: bool

    def rewrite(self, prompt: str) -> str: ...


def _sentences(text: str) -> list[str]:
    return [s.strip() + "." for s in text.split(".") if s.strip()]


def sentence_aspect(sentence: str) -> Optional[str]:
    low = sentence.lower()
    for a in ASPECTS:
        if any(re.search(rf"\b{re.escape(n)}\b", low) for n in NOUNS[a]):
            return a
    return None


class MockRewriter:
    """Deterministic stand-in for an LLM.

    Keeps the comparator's sentence skeleton (which aspects are discussed and
    in what order) and fills it with the original's content: aspect
    sentences come from the original when it discusses that aspect, else
    from the comparator; the original's other sentences take the place of
    the comparator's first non-aspect sentence (or are appended).
    """

    deterministic = True

    def rewrite(self, prompt: str) -> str:
        orig, comp = parse_prompt(prompt)
        o_sent = _sentences(orig)
        o_aspect = {}
        o_other = []
        for s in o_sent:
            a = sentence_aspect(s)
            if a is None:
                o_other.append(s)
            else:
                o_aspect.setdefault(a, s)
        out, placed = [], False
        for s in _sentences(comp):
            a = sentence_aspect(s)
            if a is None:
                if not placed:
                    out += o_other
                    placed = True
            else:
                out.append(o_aspect.get(a, s))
        if not placed:
            out += o_other
        return " ".join(out)


@dataclass
class HttpRewriter:
    """POSTs {"prompt", "model", "max_tokens"} as JSON and reads {"text"}."""

    url: str
    model: Optional[str] = None
    max_tokens: int = 512
    timeout: float = 60.0
    retries: int = 2
    backoff: float = 1.0
    deterministic: bool = False

    def rewrite(self, prompt: str) -> str:
        body = {"prompt": prompt, "max_tokens": self.max_tokens}
        if self.model:
            body["model"] = self.model
        data = json.dumps(body).encode()
        last = None
        for attempt in range(self.retries + 1):
            try:
                req = urllib.request.Request(self.url, data=data,
                                             headers={"Content-Type": "application/json"})
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode())
                text = payload["text"]
                if not isinstance(text, str):
                    raise ValueError("response field 'text' is not a string")
                return text
            except Exception as exc:  # noqa: BLE001 - surfaced per request
                last = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise RuntimeError(f"rewriter endpoint failed after {self.retries + 1} attempts: {last}")


@dataclass
class RewriteResult:
    reviews: list
    errors: list = field(default_factory=list)   # (request index, message)


def augmented_review(req: RewriteRequest, text: str) -> Review:
    c = req.comparator
    return Review(f"{req.original.id}~{req.mode}~{c.id}", text, c.overall, c.food, c.service,
                  c.noise, c.ambiance, food_original=c.food_original, source_id=req.original.id)


def rewrite(requests, rewriter: Rewriter, max_in_flight: int = 4) -> RewriteResult:
    """Run every request through ``rewriter``; output follows request order."""
    requests = list(requests)
    if not requests:
        return RewriteResult([])
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be positive")

    def one(req):
        try:
            return augmented_review(req, rewriter.rewrite(req.prompt)), None
        except Exception as exc:  # noqa: BLE001 - recorded in the manifest
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        results = list(pool.map(one, requests))
    out = RewriteResult([])
    for req, (rev, err) in zip(requests, results):
        if err is None:
            out.reviews.append(rev)
        else:
            out.errors.append((req.index, err))
    return out
