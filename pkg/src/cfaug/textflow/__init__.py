"""Review pipeline: spurious splits, matched rewriting prompts and bag-of-words evaluation."""
from .pipeline import (
    AUG_MODES,
    InfeasibleSplitError,
    TextflowConfig,
    TextflowResult,
    bow_vectorizer,
    label_mention_corr,
    make_spurious_split,
    phi_coefficient,
    run_textflow,
    train_bow,
)
from .reviews import ASPECTS, SUBRATINGS, Review, SchemaError, ingest_reviews, write_reviews
from .rewrite import (
    MODES,
    AssembleConfig,
    HttpRewriter,
    MockRewriter,
    RewriteRequest,
    RewriteResult,
    assemble_prompt,
    match_and_assemble,
    parse_prompt,
    prompt_template,
    rewrite,
)
from .synthetic import SyntheticReviewConfig, generate_reviews

__all__ = [
    "AUG_MODES", "InfeasibleSplitError", "TextflowConfig", "TextflowResult", "bow_vectorizer",
    "label_mention_corr", "make_spurious_split", "phi_coefficient", "run_textflow", "train_bow",
    "ASPECTS", "SUBRATINGS", "Review", "SchemaError", "ingest_reviews", "write_reviews",
    "MODES", "AssembleConfig", "HttpRewriter", "MockRewriter", "RewriteRequest", "RewriteResult",
    "assemble_prompt", "match_and_assemble", "parse_prompt", "prompt_template", "rewrite",
    "SyntheticReviewConfig", "generate_reviews",
]
