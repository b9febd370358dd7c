"""End-to-end sign suggestion: detect spans, align words, query the lexicon.

Words with no lexicon entry still produce a suggestion with an empty
candidate list; the gap itself is useful output (it marks vocabulary a
lexicon is missing).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .alignment import FrequencyTable, align
from .data_model import FrameSpan
from .detection import DetectionModel, detect_probs, extract_spans
from .errors import ParseError, ValidationError
from .preprocessing import PoseSequence
from .textnorm import normalize_token, whitespace_tokens

LEXICON_COLUMNS = ("word", "gloss", "uri", "domain")


@dataclass(frozen=True)
class LexiconEntry:
    gloss: str
    uri: str
    domain: Optional[str] = None


@dataclass
class Lexicon:
    """Normalized English word -> candidate sign entries."""

    entries: dict[str, list[LexiconEntry]] = field(default_factory=dict)

    def lookup(self, word: str) -> list[LexiconEntry]:
        return list(self.entries.get(normalize_token(word), []))


@dataclass
class Suggestion:
    span: FrameSpan
    word: str
    candidates: list[LexiconEntry]


def load_lexicon(path) -> Lexicon:
    """Parse a ``word,gloss,uri,domain`` CSV, grouping rows by normalized word."""
    path = Path(path)
    lexicon = Lexicon()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return lexicon
        if tuple(header) != LEXICON_COLUMNS:
            raise ParseError(path, 1, f"expected header {list(LEXICON_COLUMNS)}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LEXICON_COLUMNS):
                raise ParseError(path, line_no, f"expected {len(LEXICON_COLUMNS)} fields, got {len(row)}")
            word, gloss, uri, domain = row
            key = normalize_token(word)
            if not key:
                raise ParseError(path, line_no, f"unusable word {word!r}")
            if not gloss:
                raise ParseError(path, line_no, "empty gloss")
            lexicon.entries.setdefault(key, []).append(
                LexiconEntry(gloss=gloss, uri=uri, domain=domain or None)
            )
    return lexicon


def suggest(
    video: PoseSequence,
    sentence: str,
    model: DetectionModel,
    table: FrequencyTable,
    lexicon: Lexicon,
    threshold: float = 0.5,
    merge_gap: int = 2,
    min_len: int = 3,
) -> list[Suggestion]:
    """Detected spans with their aligned words and lexicon candidates.

    Always yields one suggestion per extracted span; component errors
    (e.g. more spans than sentence words) propagate.
    """
    probs = detect_probs(video, sentence, model)
    spans = extract_spans(probs, threshold=threshold, merge_gap=merge_gap, min_len=min_len)
    aligned = align(spans, sentence, table)
    tokens = whitespace_tokens(sentence)
    suggestions = []
    for item in aligned:
        word = tokens[item.word_index]
        suggestions.append(Suggestion(span=item.span, word=word, candidates=lexicon.lookup(word)))
    return suggestions
