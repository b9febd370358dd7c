"""Word tokenization and normalization used across alignment and statistics.

Sentences are indexed by whitespace token position everywhere in the
toolkit; normalization (lowercase, strip surrounding punctuation) is applied
only when tokens are compared or counted, never to the indices themselves.
"""

from __future__ import annotations

import string

_PUNCT = string.punctuation


def normalize_token(token: str) -> str:
    """Lowercase and strip leading/trailing punctuation. May return ''."""
    return token.lower().strip(_PUNCT)


def whitespace_tokens(sentence: str) -> list[str]:
    """Raw whitespace split; positions in this list are the word indices."""
    return sentence.split()


def normalized_tokens(sentence: str) -> list[str]:
    """Normalized forms of every whitespace token (empty forms kept in place)."""
    return [normalize_token(t) for t in sentence.split()]
