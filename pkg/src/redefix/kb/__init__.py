"""Stack Overflow knowledge base: keyword derivation, ingestion, filtering,
cleaning and per-failure-type document stores."""

from .clean import clean_html
from .rake import rake_keywords
from .stackexchange import (
    FixtureStackExchangeClient,
    QuotaExhaustedError,
    StackExchangeClient,
    StackExchangeError,
)
from .store import (
    KbBuildResult,
    KbDocument,
    KbStore,
    KeywordSet,
    SoAnswer,
    SoComment,
    SoQuestion,
    build_kb,
    fetch_questions,
    filter_and_bundle,
)

__all__ = [
    "clean_html",
    "rake_keywords",
    "FixtureStackExchangeClient",
    "QuotaExhaustedError",
    "StackExchangeClient",
    "StackExchangeError",
    "KbBuildResult",
    "KbDocument",
    "KbStore",
    "KeywordSet",
    "SoAnswer",
    "SoComment",
    "SoQuestion",
    "build_kb",
    "fetch_questions",
    "filter_and_bundle",
]
