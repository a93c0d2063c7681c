"""Explainable conversational recommender: knowledge-graph encoder, scorer,
reasoning paths and explanations, backed by the C++ core."""

from ._core import (
    ConfigError,
    DataError,
    Engine,
    Error,
    IntegrityError,
    ModelNotLoadedError,
    NotFoundError,
    ParseError,
    Service,
    ValidationError,
    bleu,
    corpus_recall,
    distinct_n,
    evaluate,
    fit,
    ingest,
    synth,
    tokenize,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Engine",
    "Error",
    "IntegrityError",
    "ModelNotLoadedError",
    "NotFoundError",
    "ParseError",
    "Service",
    "ValidationError",
    "bleu",
    "corpus_recall",
    "distinct_n",
    "evaluate",
    "fit",
    "ingest",
    "synth",
    "tokenize",
]
