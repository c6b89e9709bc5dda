"""Annotated-corpus parsing and bilingual stream construction.

The on-disk format is UTF-8 text, one sentence per line, tokens separated
by single spaces.  A token is the surface form optionally followed by
``|``-separated annotation fields::

    qariyalmaydu|ipa:qarijalmajdu|l:qari|m:Verb+Pot+Neg+Pres+A3sg

Field prefixes are ``ipa:`` for the phonemic rendering, ``l:`` for the
lemma and ``m:`` for ``+``-joined morphological properties, each stored as
a separate tag.  The surface form always comes first so that output word
vectors have a key even when only phonemic units are trained.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional

import numpy as np

from .errors import EmptyCorpus, MalformedToken, ZeroLowResourceCorpus

log = logging.getLogger(__name__)

FIELD_SEPARATOR = "|"
TAG_JOINER = "+"
PHONEMIC_PREFIX = "ipa:"
LEMMA_PREFIX = "l:"
MORPH_PREFIX = "m:"


@dataclass(frozen=True)
class AnnotatedToken:
    """One corpus token: surface form plus optional linguistic annotations."""

    surface: str
    phonemic: Optional[str] = None
    lemma: Optional[str] = None
    morph_tags: tuple = ()

    def render(self) -> str:
        """Canonical on-disk form; ``parse_token(t.render()) == t``."""
        parts = [self.surface]
        if self.phonemic is not None:
            parts.append(PHONEMIC_PREFIX + self.phonemic)
        if self.lemma is not None:
            parts.append(LEMMA_PREFIX + self.lemma)
        if self.morph_tags:
            parts.append(MORPH_PREFIX + TAG_JOINER.join(self.morph_tags))
        return FIELD_SEPARATOR.join(parts)


# A sentence is simply an ordered list of AnnotatedToken; empty lines never
# produce one.
Sentence = List[AnnotatedToken]


@dataclass
class CorpusStats:
    """Counts collected while scanning a corpus."""

    token_count: int = 0
    sentence_count: int = 0
    annotated_fraction_per_field: dict = field(default_factory=dict)


def parse_token(raw: str) -> AnnotatedToken:
    """Parse one whitespace-free token in the annotated format.

    Raises :class:`MalformedToken` for an empty surface, an unknown or
    duplicate field prefix, an empty field payload, or a boundary symbol
    (``<``/``>``) inside a string destined for n-gram extraction.
    """
    fields = raw.split(FIELD_SEPARATOR)
    surface = fields[0]
    if not surface:
        raise MalformedToken(f"empty surface form in token {raw!r}")
    if "<" in surface or ">" in surface:
        raise MalformedToken(f"surface contains a reserved boundary symbol: {raw!r}")
    phonemic = None
    lemma = None
    morph_tags: tuple = ()
    seen = set()
    for part in fields[1:]:
        if part.startswith(PHONEMIC_PREFIX):
            prefix, payload = PHONEMIC_PREFIX, part[len(PHONEMIC_PREFIX):]
        elif part.startswith(LEMMA_PREFIX):
            prefix, payload = LEMMA_PREFIX, part[len(LEMMA_PREFIX):]
        elif part.startswith(MORPH_PREFIX):
            prefix, payload = MORPH_PREFIX, part[len(MORPH_PREFIX):]
        else:
            raise MalformedToken(f"unknown field prefix in token {raw!r}: {part!r}")
        if prefix in seen:
            raise MalformedToken(f"duplicate field {prefix!r} in token {raw!r}")
        seen.add(prefix)
        if not payload:
            raise MalformedToken(f"empty {prefix!r} payload in token {raw!r}")
        if prefix == PHONEMIC_PREFIX:
            if "<" in payload or ">" in payload:
                raise MalformedToken(
                    f"phonemic form contains a reserved boundary symbol: {raw!r}"
                )
            phonemic = payload
        elif prefix == LEMMA_PREFIX:
            lemma = payload
        else:
            # Each +-separated property becomes its own tag; empty segments
            # are dropped and duplicates keep their first position.
            tags = []
            for tag in payload.split(TAG_JOINER):
                if tag and tag not in tags:
                    tags.append(tag)
            morph_tags = tuple(tags)
    return AnnotatedToken(surface, phonemic, lemma, morph_tags)


def read_corpus(source, lenient: bool = False) -> Iterator[Sentence]:
    """Stream sentences from a path or an open text/binary file.

    Empty and whitespace-only lines are skipped.  Malformed tokens abort
    with line/position context by default; under ``lenient`` they are
    logged and skipped (a sentence left empty is dropped).
    """
    if hasattr(source, "read"):
        yield from _read_lines(source, lenient)
    else:
        with open(source, "r", encoding="utf-8") as handle:
            yield from _read_lines(handle, lenient)


def _read_lines(handle, lenient: bool) -> Iterator[Sentence]:
    for lineno, line in enumerate(handle, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        tokens = []
        for position, raw in enumerate(line.split(" "), start=1):
            try:
                tokens.append(parse_token(raw))
            except MalformedToken as err:
                if not lenient:
                    raise MalformedToken(
                        f"line {lineno}, token {position}: {err}"
                    ) from err
                log.warning("skipping malformed token at line %d, token %d: %s",
                            lineno, position, err)
        if tokens:
            yield tokens


class FileCorpus:
    """Re-iterable corpus bound to a file path.

    Each iteration re-opens the file, so the same object can feed both
    vocabulary construction and multi-epoch training.
    """

    def __init__(self, path, lenient: bool = False):
        self.path = path
        self.lenient = lenient

    def __iter__(self) -> Iterator[Sentence]:
        return read_corpus(self.path, lenient=self.lenient)


def corpus_stats(sentences: Iterable[Sentence]) -> CorpusStats:
    """Token/sentence counts and per-field annotation coverage."""
    stats = CorpusStats()
    with_phonemic = with_lemma = with_tags = 0
    for sentence in sentences:
        stats.sentence_count += 1
        stats.token_count += len(sentence)
        for token in sentence:
            with_phonemic += token.phonemic is not None
            with_lemma += token.lemma is not None
            with_tags += bool(token.morph_tags)
    if stats.token_count:
        stats.annotated_fraction_per_field = {
            "phonemic": with_phonemic / stats.token_count,
            "lemma": with_lemma / stats.token_count,
            "morph_tags": with_tags / stats.token_count,
        }
    return stats


def upsample_factor(hr_tokens: int, lr_tokens: int,
                    override: Optional[int] = None) -> int:
    """Replication factor for the low-resource corpus in joint training.

    Defaults to the token-count ratio rounded half-up, floored at 1, so
    the optimizer is not dominated by the high-resource language.
    """
    if override is not None:
        if override < 1:
            raise ValueError(f"upsample override must be positive, got {override}")
        return override
    if lr_tokens <= 0:
        raise ZeroLowResourceCorpus("low-resource corpus has no tokens")
    return max(1, math.floor(hr_tokens / lr_tokens + 0.5))


def merge_joint(hr: Iterable[Sentence], lr: Iterable[Sentence], factor: int,
                seed: int) -> List[Sentence]:
    """Merged bilingual corpus: HR once, LR ``factor`` times, shuffled.

    The shuffle works at sentence granularity with a seeded permutation so
    neither language forms one contiguous block late in training; the same
    seed always yields the same order.
    """
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    merged = list(hr)
    lr_sentences = list(lr)
    for _ in range(factor):
        merged.extend(lr_sentences)
    order = np.random.default_rng(seed).permutation(len(merged))
    return [merged[i] for i in order]
