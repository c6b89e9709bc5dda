"""Subword unit extraction and vector composition.

A word is broken into typed units: the surface form itself, character
n-grams of the surface, the whole phonemic form, phoneme n-grams, the
lemma, and individual morphological tags.  Each unit owns one row of the
input embedding matrix, and a word vector is the arithmetic mean of its
unit rows.  Units of different kinds never collide even when their text
coincides ("qari" as a lemma and "qari" as a surface word are distinct
atoms), and units carry no language marker, so identical units are shared
across languages in joint training.
"""

import enum
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .corpus import AnnotatedToken
from .errors import (
    DimensionMismatch,
    EmptyUnitList,
    MissingAnnotation,
    ReservedCharacter,
)

BOUNDARY_START = "<"
BOUNDARY_END = ">"


class UnitKind(enum.IntEnum):
    """Unit types in their fixed composition order."""

    WORD = 0
    CHAR_NGRAM = 1
    PHON_WORD = 2
    PHON_NGRAM = 3
    LEMMA = 4
    MORPH_TAG = 5


# Serialization tags used in checkpoint and vector files.
KIND_TAGS = {
    UnitKind.WORD: "w",
    UnitKind.CHAR_NGRAM: "c",
    UnitKind.PHON_WORD: "pw",
    UnitKind.PHON_NGRAM: "p",
    UnitKind.LEMMA: "l",
    UnitKind.MORPH_TAG: "m",
}
TAG_KINDS = {tag: kind for kind, tag in KIND_TAGS.items()}

# Names accepted on the command line, mirroring the ablation row labels.
KIND_NAMES = {
    "word": UnitKind.WORD,
    "char-ngrams": UnitKind.CHAR_NGRAM,
    "phon-word": UnitKind.PHON_WORD,
    "phon-ngrams": UnitKind.PHON_NGRAM,
    "lemma": UnitKind.LEMMA,
    "morph": UnitKind.MORPH_TAG,
}
NAME_OF_KIND = {kind: name for name, kind in KIND_NAMES.items()}


class UnitKey(NamedTuple):
    """A typed subword identifier: the atom of the input embedding table."""

    kind: UnitKind
    text: str

    def serialize(self) -> str:
        return f"{KIND_TAGS[self.kind]}:{self.text}"


def parse_unit_key(s: str) -> UnitKey:
    """Inverse of :meth:`UnitKey.serialize` (text may itself contain ':')."""
    tag, sep, text = s.partition(":")
    if not sep or tag not in TAG_KINDS or not text:
        raise ValueError(f"not a serialized unit key: {s!r}")
    return UnitKey(TAG_KINDS[tag], text)


@dataclass(frozen=True)
class UnitConfig:
    """Which unit kinds are active and the n-gram length range."""

    kinds: frozenset = frozenset({UnitKind.CHAR_NGRAM})
    min_n: int = 3
    max_n: int = 6

    def __post_init__(self):
        kinds = frozenset(UnitKind(k) for k in self.kinds)
        object.__setattr__(self, "kinds", kinds)
        if not kinds:
            raise ValueError("at least one unit kind must be enabled")
        if not (1 <= self.min_n <= self.max_n):
            raise ValueError(f"need 1 <= min_n <= max_n, got [{self.min_n}, {self.max_n}]")

    def kind_names(self) -> str:
        return ",".join(NAME_OF_KIND[k] for k in sorted(self.kinds))

    @classmethod
    def from_names(cls, names: str, min_n: int = 3, max_n: int = 6) -> "UnitConfig":
        """Build from a comma-separated list like ``"phon-ngrams,lemma,morph"``."""
        kinds = set()
        for name in names.split(","):
            name = name.strip()
            if name not in KIND_NAMES:
                raise ValueError(
                    f"unknown unit kind {name!r}; choose from {', '.join(KIND_NAMES)}"
                )
            kinds.add(KIND_NAMES[name])
        return cls(kinds=frozenset(kinds), min_n=min_n, max_n=max_n)


def extract_ngrams(s: str, min_n: int, max_n: int) -> list:
    """All n-grams of ``"<" + s + ">"`` for n in [min_n, max_n].

    Lengths are counted in code points, so multi-byte scripts are handled
    per character.  Results come in (length, start position) order and
    duplicates are retained: each occurrence contributes to the mean.
    """
    if not s:
        raise ValueError("cannot extract n-grams from an empty string")
    if BOUNDARY_START in s or BOUNDARY_END in s:
        raise ReservedCharacter(f"string contains a boundary symbol: {s!r}")
    padded = BOUNDARY_START + s + BOUNDARY_END
    length = len(padded)
    grams = []
    for n in range(min_n, max_n + 1):
        for start in range(length - n + 1):
            grams.append(padded[start:start + n])
    return grams


_warned_fields = set()


def _warn_missing(field_name: str) -> None:
    # One warning per field per process, not one per token.
    if field_name not in _warned_fields:
        _warned_fields.add(field_name)
        warnings.warn(
            f"tokens without a {field_name!r} annotation contribute no units of "
            f"that kind (lenient mode)",
            stacklevel=3,
        )


def unit_keys(token: AnnotatedToken, config: UnitConfig, lenient: bool = False) -> list:
    """Enumerate the unit keys of one annotated token.

    Kinds appear in the fixed order word, char n-grams, phonemic word,
    phoneme n-grams, lemma, morph tags, restricted to ``config.kinds``.
    A required annotation that is absent raises :class:`MissingAnnotation`
    unless ``lenient`` is set, in which case the kind is skipped with a
    once-per-field warning.  Morph tags are never required: an untagged
    token simply contributes no tag units.
    """
    keys = []
    kinds = config.kinds
    if UnitKind.WORD in kinds:
        keys.append(UnitKey(UnitKind.WORD, token.surface))
    if UnitKind.CHAR_NGRAM in kinds:
        for gram in extract_ngrams(token.surface, config.min_n, config.max_n):
            keys.append(UnitKey(UnitKind.CHAR_NGRAM, gram))
    if UnitKind.PHON_WORD in kinds or UnitKind.PHON_NGRAM in kinds:
        if token.phonemic is None:
            if not lenient:
                raise MissingAnnotation(
                    f"token {token.surface!r} has no phonemic form but a "
                    f"phonological unit kind is enabled"
                )
            _warn_missing("phonemic")
        else:
            if UnitKind.PHON_WORD in kinds:
                keys.append(UnitKey(UnitKind.PHON_WORD, token.phonemic))
            if UnitKind.PHON_NGRAM in kinds:
                for gram in extract_ngrams(token.phonemic, config.min_n, config.max_n):
                    keys.append(UnitKey(UnitKind.PHON_NGRAM, gram))
    if UnitKind.LEMMA in kinds:
        if token.lemma is None:
            if not lenient:
                raise MissingAnnotation(
                    f"token {token.surface!r} has no lemma but the lemma "
                    f"unit kind is enabled"
                )
            _warn_missing("lemma")
        else:
            keys.append(UnitKey(UnitKind.LEMMA, token.lemma))
    if UnitKind.MORPH_TAG in kinds:
        for tag in token.morph_tags:
            keys.append(UnitKey(UnitKind.MORPH_TAG, tag))
    return keys


def compose(unit_vectors, dim: Optional[int] = None) -> np.ndarray:
    """Component-wise arithmetic mean of the unit vectors.

    The mean (rather than the sum) removes any bias towards words that
    happen to have many or few subword units.
    """
    vectors = np.asarray(unit_vectors)
    if vectors.size == 0:
        raise EmptyUnitList("cannot compose zero unit vectors")
    if vectors.ndim == 1:
        vectors = vectors[None, :]
    if dim is not None and vectors.shape[1] != dim:
        raise DimensionMismatch(
            f"unit vectors have dimension {vectors.shape[1]}, expected {dim}"
        )
    return vectors.mean(axis=0)
