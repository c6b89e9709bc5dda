"""Embedding inspection: lookups, neighbors, likelihood oracles, PCA.

Everything here reads an immutable :class:`~subgram.trainer.Model`.  The
full-softmax probability and the corpus log-likelihood are evaluation
oracles for small vocabularies; training itself never enumerates the
softmax denominator.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .corpus import AnnotatedToken, Sentence
from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    EmptyCorpus,
    EmptyKind,
    MalformedVectorFile,
    OovEmpty,
)
from .subword import UnitKind, unit_keys
from .trainer import Model, format_floats, window_contexts
from .vocab import Vocabulary


def word_vector(model: Model, token: AnnotatedToken) -> Tuple[np.ndarray, bool]:
    """Composed vector for any token, in or out of vocabulary.

    Units absent from the unit table are skipped, so an unseen word still
    gets a vector from whatever n-grams, lemma or tags it shares with the
    training data.  Returns ``(vector, is_oov)`` where ``is_oov`` marks
    the all-units-unknown case (zero vector); callers decide whether that
    is an error.
    """
    keys = unit_keys(token, model.unit_config, lenient=True)
    ids = [model.vocab.unit_index[k] for k in keys if k in model.vocab.unit_index]
    if not ids:
        return np.zeros(model.dim, dtype=model.input.dtype), True
    return model.input[np.asarray(ids)].mean(axis=0), False


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cosine of shapes {u.shape} and {v.shape}")
    nu = math.sqrt(u @ u)
    nv = math.sqrt(v @ v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


@dataclass
class QueryResult:
    """Nearest-neighbor list: (surface, cosine), best first."""

    neighbors: List[Tuple[str, float]]


def nearest_neighbors(model: Model, query: AnnotatedToken, k: int) -> QueryResult:
    """Top-k vocabulary words by cosine between the composed query vector
    and each word's context (output) row.

    The context rows are the word-level half of the trained dot-product
    scorer, so they exist for every configuration and every loaded
    checkpoint.  The query surface itself is excluded; ties break by
    surface order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q, is_oov = word_vector(model, query)
    if is_oov:
        raise OovEmpty(f"query {query.surface!r} shares no units with the model")
    q = q.astype(np.float64)
    qn = math.sqrt(q @ q)
    rows = model.output.astype(np.float64)
    norms = np.sqrt((rows * rows).sum(axis=1))
    dots = rows @ q
    with np.errstate(invalid="ignore", divide="ignore"):
        cosines = np.where(norms > 0, dots / (norms * qn), 0.0)
    ranked = sorted(
        ((entry.surface, float(c))
         for entry, c in zip(model.vocab.words, cosines)
         if entry.surface != query.surface),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return QueryResult(neighbors=ranked[:k])


def softmax_probability(model: Model, focus_units, target_word: int) -> float:
    """Full-softmax probability of one context word given the focus units.

    Log-sum-exp stabilized; probabilities over the whole word table sum
    to 1 within 1e-10.  Only usable when the vocabulary is small enough
    to enumerate, which is exactly its role as a testing oracle.
    """
    rows = model.input[np.asarray(focus_units, dtype=np.int64)]
    u = rows.mean(axis=0).astype(np.float64)
    scores = model.output.astype(np.float64) @ u
    peak = scores.max()
    log_z = peak + math.log(np.exp(scores - peak).sum())
    return math.exp(scores[target_word] - log_z)


def corpus_log_likelihood(model: Model, corpus: Iterable[Sentence], window: int,
                          fixed_window: bool = True,
                          rng: Optional[np.random.Generator] = None) -> float:
    """Sum of log softmax probabilities over all (focus, context) pairs.

    Focus tokens with no known units and context words outside the word
    table are skipped; no subsampling is applied.  This evaluates the
    exact objective that negative sampling approximates, so training is
    expected to increase it without ever computing it.
    """
    vocab = model.vocab
    output = model.output.astype(np.float64)
    total = 0.0
    sentences = 0
    for sentence in corpus:
        sentences += 1
        wids = [vocab.word_index.get(tok.surface) for tok in sentence]
        composed = []
        for tok in sentence:
            keys = unit_keys(tok, model.unit_config, lenient=True)
            ids = [vocab.unit_index[key] for key in keys if key in vocab.unit_index]
            composed.append(
                model.input[np.asarray(ids)].mean(axis=0).astype(np.float64)
                if ids else None
            )
        for i, u in enumerate(composed):
            if u is None:
                continue
            scores = output @ u
            peak = scores.max()
            log_z = peak + math.log(np.exp(scores - peak).sum())
            for j in window_contexts(len(sentence), i, window, rng, fixed_window):
                if wids[j] is None:
                    continue
                total += scores[wids[j]] - log_z
    if sentences == 0:
        raise EmptyCorpus("log-likelihood of an empty corpus")
    return total


@dataclass
class CoverageReport:
    """Per-kind overlap between a low-resource unit table and a reference."""

    per_kind: dict  # UnitKind -> (lr_count, shared_count)

    def fraction(self, kind: UnitKind) -> float:
        lr_count, shared = self.per_kind[kind]
        return shared / lr_count

    def lines(self) -> List[str]:
        out = []
        for kind in sorted(self.per_kind):
            lr_count, shared = self.per_kind[kind]
            out.append(
                f"{kind.name}: {shared}/{lr_count} ({100.0 * shared / lr_count:.1f}%)"
            )
        return out


def unit_coverage(lr_vocab: Vocabulary, hr: "Vocabulary | Model",
                  kinds: Optional[Iterable[UnitKind]] = None) -> CoverageReport:
    """Fraction of low-resource unit keys present in the reference table.

    This is the statistic that predicts how much a fine-tune transfer can
    reuse.  ``kinds`` defaults to every kind present in the low-resource
    table; explicitly requesting an absent kind raises :class:`EmptyKind`.
    """
    hr_vocab = hr.vocab if isinstance(hr, Model) else hr
    hr_keys = set(hr_vocab.unit_index)
    by_kind = {}
    for key in lr_vocab.units:
        lr_count, shared = by_kind.get(key.kind, (0, 0))
        by_kind[key.kind] = (lr_count + 1, shared + (key in hr_keys))
    if kinds is None:
        return CoverageReport(per_kind=by_kind)
    report = {}
    for kind in kinds:
        kind = UnitKind(kind)
        if kind not in by_kind:
            raise EmptyKind(f"low-resource table has no units of kind {kind.name}")
        report[kind] = by_kind[kind]
    return CoverageReport(per_kind=report)


def pca2(vectors: List[Tuple[str, np.ndarray]], selection: List[str],
         tol: float = 1e-9, max_iter: int = 1000) -> List[Tuple[str, float, float]]:
    """Two-dimensional PCA projection of the selected labeled vectors.

    Centers the selection, extracts the top two principal directions by
    power iteration with deflation, and fixes each component's sign so its
    largest-magnitude loading is positive (reproducible plots).
    """
    table = {}
    for label, vec in vectors:
        table[label] = np.asarray(vec, dtype=np.float64)
    missing = [label for label in selection if label not in table]
    if missing:
        raise ValueError(f"labels not present in the vector table: {missing}")
    if len(selection) < 3:
        raise ValueError(f"need at least 3 selected vectors, got {len(selection)}")
    x = np.vstack([table[label] for label in selection])
    if x.shape[1] < 2:
        raise DimensionMismatch("PCA to two components needs dimension >= 2")
    centered = x - x.mean(axis=0)
    scatter = centered.T @ centered
    scale = np.trace(scatter)
    if scale <= 0.0:
        raise DegenerateVariance("all selected vectors are identical")
    rng = np.random.default_rng(0)
    first, lam1 = _power_iteration(scatter, rng, tol, max_iter, scale)
    deflated = scatter - lam1 * np.outer(first, first)
    second, _ = _power_iteration(deflated, rng, tol, max_iter, scale,
                                 orthogonal_to=first)
    first = _fix_sign(first)
    second = _fix_sign(second)
    xs = centered @ first
    ys = centered @ second
    return [(label, float(xs[i]), float(ys[i]))
            for i, label in enumerate(selection)]


def _power_iteration(matrix, rng, tol, max_iter, scale, orthogonal_to=None):
    d = matrix.shape[0]
    v = rng.standard_normal(d)
    if orthogonal_to is not None:
        v -= (v @ orthogonal_to) * orthogonal_to
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = matrix @ v
        if orthogonal_to is not None:
            w -= (w @ orthogonal_to) * orthogonal_to
        norm = np.linalg.norm(w)
        if norm <= tol * scale:
            # No variance left in the remaining subspace; the current
            # direction is as good as any and projects to ~0.
            return v, 0.0
        w /= norm
        if 1.0 - abs(w @ v) < tol:
            return w, float(w @ matrix @ w)
        v = w
    return v, float(v @ matrix @ v)


def _fix_sign(component):
    peak = np.argmax(np.abs(component))
    if component[peak] < 0:
        return -component
    return component


# --------------------------------------------------------------------------
# Word-vector text files
# --------------------------------------------------------------------------

def export_vectors(model: Model, mode: str = "composed-words") -> str:
    """Render vectors as text: header ``<rows> <dim>``, one entry per line.

    ``raw-units`` emits every unit row keyed by its serialized unit key
    (``m:Verb``, ``p:<qa``, ...).  ``composed-words`` emits, for each
    vocabulary word, the composition over units derivable from the bare
    surface form (word and character n-gram kinds); configurations built
    purely on annotations should compose annotated tokens through
    :func:`word_vector` or consume the raw units instead.
    """
    lines = []
    if mode == "raw-units":
        lines.append(f"{len(model.vocab.units)} {model.dim}")
        for unit_id, key in enumerate(model.vocab.units):
            lines.append(f"{key.serialize()} {format_floats(model.input[unit_id])}")
    elif mode == "composed-words":
        lines.append(f"{len(model.vocab.words)} {model.dim}")
        for entry in model.vocab.words:
            vec, _ = word_vector(model, AnnotatedToken(entry.surface))
            lines.append(f"{entry.surface} {format_floats(vec)}")
    else:
        raise ValueError(f"unknown export mode {mode!r}")
    return "\n".join(lines) + "\n"


def import_vectors(text: str) -> List[Tuple[str, np.ndarray]]:
    """Parse the text format back into (name, vector) rows, order kept."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedVectorFile("empty vector file")
    header = lines[0].split()
    if len(header) != 2:
        raise MalformedVectorFile(f"bad header line: {lines[0]!r}")
    try:
        rows, dim = int(header[0]), int(header[1])
    except ValueError as err:
        raise MalformedVectorFile(f"bad header line: {lines[0]!r}") from err
    if len(lines) - 1 != rows:
        raise MalformedVectorFile(
            f"header declares {rows} rows but file has {len(lines) - 1}"
        )
    table = []
    for line in lines[1:]:
        name, _, numbers = line.partition(" ")
        try:
            vec = np.array(numbers.split(), dtype=np.float64)
        except ValueError as err:
            raise MalformedVectorFile(f"unparseable vector line: {line!r}") from err
        if not name or vec.shape != (dim,):
            raise MalformedVectorFile(f"row does not match dimension {dim}: {line!r}")
        table.append((name, vec))
    return table
