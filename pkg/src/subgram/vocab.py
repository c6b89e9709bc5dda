"""Word and unit vocabularies, frequent-word subsampling, negative table.

The word table (output side) is frequency-thresholded and ranked by count;
the unit table (input side) is the exact union of subword units over every
token whose surface survived the threshold.  Units carry no threshold of
their own: rare words' tags and lemmas are precisely where subword sharing
pays off in low-resource settings.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional

import numpy as np

from .corpus import Sentence
from .errors import EmptyVocabulary
from .subword import UnitConfig, UnitKey, unit_keys

DEFAULT_MIN_COUNT = 5
DEFAULT_SUBSAMPLE_T = 1e-4
DEFAULT_POWER = 0.75
DEFAULT_TABLE_SIZE = 10_000_000


class WordEntry(NamedTuple):
    surface: str
    count: int


@dataclass
class Vocabulary:
    """Frequency-ranked word table plus unit table with stable integer ids.

    Word ids run 0..len(words)-1 with counts non-increasing and ties broken
    by surface order; unit ids follow (kind, text) order.  ``total_tokens``
    counts every token seen, including words later dropped by the
    threshold, so subsampling probabilities use raw corpus frequencies.
    """

    words: List[WordEntry]
    units: List[UnitKey]
    total_tokens: int
    sentence_count: int = 0
    unit_config: Optional[UnitConfig] = None
    word_index: dict = field(default_factory=dict)
    unit_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.word_index:
            self.word_index = {w.surface: i for i, w in enumerate(self.words)}
        if not self.unit_index:
            self.unit_index = {u: i for i, u in enumerate(self.units)}

    @property
    def counts(self) -> np.ndarray:
        return np.array([w.count for w in self.words], dtype=np.int64)


def build_vocab(corpus: Iterable[Sentence], min_count: int = DEFAULT_MIN_COUNT,
                unit_config: Optional[UnitConfig] = None,
                lenient: bool = False) -> Vocabulary:
    """Scan a corpus once and build both tables.

    Deterministic for a given corpus regardless of how the stream is
    chunked: words sort by (-count, surface) and units by (kind, text).
    """
    if unit_config is None:
        unit_config = UnitConfig()
    counts = {}
    units_by_surface = {}
    total_tokens = 0
    sentence_count = 0
    for sentence in corpus:
        sentence_count += 1
        for token in sentence:
            total_tokens += 1
            counts[token.surface] = counts.get(token.surface, 0) + 1
            bucket = units_by_surface.setdefault(token.surface, set())
            bucket.update(unit_keys(token, unit_config, lenient=lenient))
    surviving = [(s, c) for s, c in counts.items() if c >= min_count]
    if not surviving:
        raise EmptyVocabulary(
            f"no word reached min_count={min_count} "
            f"(corpus has {total_tokens} tokens, {len(counts)} types)"
        )
    surviving.sort(key=lambda item: (-item[1], item[0]))
    words = [WordEntry(surface, count) for surface, count in surviving]
    unit_set = set()
    for surface, _ in surviving:
        unit_set.update(units_by_surface[surface])
    units = sorted(unit_set)
    return Vocabulary(words=words, units=units, total_tokens=total_tokens,
                      sentence_count=sentence_count, unit_config=unit_config)


def discard_probability(word_count: int, total_tokens: int, t: float) -> float:
    """Probability of dropping one occurrence of a frequent word.

    ``max(0, 1 - sqrt(t / f))`` with ``f = word_count / total_tokens``;
    words at or below the threshold frequency are never dropped.  ``t <= 0``
    disables subsampling.
    """
    if t <= 0:
        return 0.0
    f = word_count / total_tokens
    if f <= t:
        return 0.0
    return 1.0 - math.sqrt(t / f)


@dataclass
class NegativeTable:
    """Word ids laid out in proportion to count**power for O(1) sampling."""

    cells: np.ndarray
    size: int
    power: float = DEFAULT_POWER


def build_negative_table(vocab: Vocabulary, power: float = DEFAULT_POWER,
                         size: int = DEFAULT_TABLE_SIZE) -> NegativeTable:
    """Quantize the smoothed unigram distribution onto ``size`` cells.

    Cell j holds the word whose cumulative probability interval contains
    j/size, so per-word cell fractions match count**power / Z within
    1/size.
    """
    counts = vocab.counts.astype(np.float64)
    if size < len(counts):
        raise ValueError(
            f"table size {size} is smaller than the vocabulary ({len(counts)})"
        )
    weights = counts ** power
    cum = np.cumsum(weights / weights.sum())
    cum[-1] = 1.0
    grid = np.arange(size, dtype=np.float64) / size
    cells = np.searchsorted(cum, grid, side="right").astype(np.int32)
    np.clip(cells, 0, len(counts) - 1, out=cells)
    return NegativeTable(cells=cells, size=size, power=power)


def sample_negatives(table: NegativeTable, rng: np.random.Generator, k: int,
                     exclude: Optional[int] = None) -> np.ndarray:
    """Draw k word ids uniformly over the table cells.

    Draws equal to ``exclude`` are dropped rather than resampled, so the
    result may be shorter than k; the work per step stays bounded and the
    bias is negligible for any realistic vocabulary.
    """
    draws = table.cells[rng.integers(0, table.size, size=k)]
    if exclude is None:
        return draws
    return draws[draws != exclude]
