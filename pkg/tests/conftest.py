"""Shared fixtures and hypothesis profiles."""

import os
from datetime import timedelta

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", deadline=timedelta(milliseconds=2000), suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("dev", max_examples=25)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def whitespace_tokenizer():
    from xlpack.tokenization import WhitespaceTokenizer

    return WhitespaceTokenizer()


@pytest.fixture
def fixture_pair():
    """The two-context pair: N=10 packs it into lengths [10, 7]."""
    from xlpack.alignment import ArticlePair, PairId

    return ArticlePair(
        pair=PairId(10, 100),
        title_en="Cat",
        title_l="Gato",
        text_en="a b c\n\nd e",
        text_l="x y z w\n\nv u",
        lang_l="es",
    )
