"""Inverse-frequency heuristic alignment of detected spans to English words.

Fingerspelling mostly spells words that are rare in general English, so
given n detected segments we pick the n least frequent words of the
sentence (unknown words count as frequency zero, i.e. most likely to be
fingerspelled) and pair them with the segments in order of appearance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

from .data_model import AlignedSpan, FrameSpan
from .errors import ParseError, ValidationError
from .textnorm import normalize_token, whitespace_tokens


@dataclass(frozen=True)
class FrequencyTable:
    """Corpus word counts; keys are lowercased and punctuation-stripped."""

    counts: dict[str, float]
    total_tokens: float

    @classmethod
    def from_counts(cls, counts: dict[str, float]) -> "FrequencyTable":
        cleaned = {}
        for word, count in counts.items():
            if count < 0:
                raise ValidationError(f"negative count for {word!r}")
            key = normalize_token(word)
            if key:
                cleaned[key] = cleaned.get(key, 0.0) + float(count)
        return cls(counts=cleaned, total_tokens=float(sum(cleaned.values())))

    def frequency(self, word: str) -> float:
        """Count for a word; unknown words have frequency 0."""
        return self.counts.get(normalize_token(word), 0.0)


def build_frequency_table(corpus: Union[Iterable[str], TextIO]) -> FrequencyTable:
    """Count tokens in a plaintext stream (any iterable of lines)."""
    counts: dict[str, float] = {}
    for line in corpus:
        for token in line.split():
            key = normalize_token(token)
            if key:
                counts[key] = counts.get(key, 0.0) + 1.0
    return FrequencyTable(counts=counts, total_tokens=float(sum(counts.values())))


def build_frequency_table_from_file(path) -> FrequencyTable:
    with open(path, "r", encoding="utf-8") as fh:
        return build_frequency_table(fh)


def save_frequency_table(table: FrequencyTable, path) -> None:
    """Persist as sorted ``word<TAB>count`` lines."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for word in sorted(table.counts):
            count = table.counts[word]
            text = str(int(count)) if float(count).is_integer() else repr(count)
            fh.write(f"{word}\t{text}\n")


def load_frequency_table(path) -> FrequencyTable:
    counts: dict[str, float] = {}
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected word<TAB>count, got {line.rstrip()!r}")
            try:
                counts[parts[0]] = float(parts[1])
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad count: {exc}") from exc
    return FrequencyTable.from_counts(counts)


def align(
    spans: Sequence[FrameSpan], sentence: str, table: FrequencyTable
) -> list[AlignedSpan]:
    """Map each detected span, in order, to one of the sentence's rarest words.

    Candidates are whitespace tokens with a non-empty normalized form (pure
    punctuation cannot be fingerspelled). The n least frequent candidates
    are selected (ties broken by leftmost position, then lexicographically)
    and re-sorted by sentence position, so span order and word order match.
    """
    tokens = whitespace_tokens(sentence)
    candidates = []
    for pos, token in enumerate(tokens):
        norm = normalize_token(token)
        if norm:
            candidates.append((table.frequency(norm), pos, norm))
    n = len(spans)
    if n > len(candidates):
        raise ValidationError(
            f"cannot align {n} spans to a sentence with {len(tokens)} tokens "
            f"({len(candidates)} usable)"
        )
    selected = sorted(candidates)[:n]
    selected.sort(key=lambda c: c[1])
    return [AlignedSpan(span=span, word_index=pos) for span, (_, pos, _) in zip(spans, selected)]
