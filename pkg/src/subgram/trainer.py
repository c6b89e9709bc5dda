"""Skipgram training with negative sampling over composed unit vectors.

The focus word is represented as the mean of its subword-unit input rows;
context words own whole-word output rows.  One training step scores the
focus against one observed context word plus k sampled negatives with a
binary logistic loss, then applies the exact SGD update: each output row
moves along the composed vector, and the accumulated output-side gradient
is pushed back through the mean onto every unit row (carrying the 1/|P|
factor, so words with many units are not biased).

Three regimes share this loop: monolingual training, joint bilingual
training on a merged corpus, and fine-tune initialization where unit rows
learned on a high-resource language seed a low-resource model.
"""

import logging
import math
import threading
import zlib
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .corpus import Sentence
from .errors import (
    ChecksumMismatch,
    DimensionMismatch,
    EmptyCorpus,
    EmptyVocabulary,
    IncompatibleFormatVersion,
    NonFiniteParameter,
)
from .subword import UnitConfig, UnitKind, parse_unit_key, unit_keys
from .vocab import (
    DEFAULT_MIN_COUNT,
    DEFAULT_SUBSAMPLE_T,
    NegativeTable,
    Vocabulary,
    WordEntry,
    build_negative_table,
    discard_probability,
    sample_negatives,
)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "SUBGRAM1"
SIGMOID_CLAMP = 30.0
LR_FLOOR = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    dim: int = 100
    window: int = 3
    negatives: int = 5
    epochs: int = 5
    lr0: float = 0.05
    min_n: int = 3
    max_n: int = 6
    min_count: int = DEFAULT_MIN_COUNT
    subsample_t: float = DEFAULT_SUBSAMPLE_T
    seed: int = 1
    thread_count: int = 1
    fixed_window: bool = False
    freeze_transferred_epochs: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lr0", float(self.lr0))
        object.__setattr__(self, "subsample_t", float(self.subsample_t))
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {self.negatives}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if self.thread_count < 1:
            raise ValueError(f"thread_count must be >= 1, got {self.thread_count}")
        if self.freeze_transferred_epochs < 0:
            raise ValueError("freeze_transferred_epochs must be >= 0")


@dataclass
class Model:
    """Input matrix over unit ids, output matrix over word ids."""

    input: np.ndarray
    output: np.ndarray
    unit_config: UnitConfig
    vocab: Vocabulary
    config: Optional[TrainConfig] = None
    lang: str = ""
    transferred_unit_ids: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.input.shape[1]


def init_model(vocab: Vocabulary, config: TrainConfig, rng: np.random.Generator,
               unit_config: Optional[UnitConfig] = None,
               dtype=np.float32) -> Model:
    """Fresh model: unit rows i.i.d. uniform on [-1/dim, 1/dim], output zero.

    Zero-initialized output rows make the first training step a fixed
    point of the gradient, which keeps early training well behaved.
    """
    if not vocab.words:
        raise EmptyVocabulary("cannot initialize a model over an empty word table")
    if unit_config is None:
        unit_config = vocab.unit_config or UnitConfig(
            min_n=config.min_n, max_n=config.max_n
        )
    bound = 1.0 / config.dim
    inp = rng.uniform(-bound, bound, size=(len(vocab.units), config.dim))
    out = np.zeros((len(vocab.words), config.dim), dtype=dtype)
    return Model(input=inp.astype(dtype), output=out, unit_config=unit_config,
                 vocab=vocab, config=config)


def pair_loss(s: float, positive: bool) -> Tuple[float, float]:
    """Binary logistic loss and its derivative d(loss)/ds for one pair.

    Positive pairs: loss = -log(sigmoid(s)), g = sigmoid(s) - 1.
    Negative pairs: loss = -log(1 - sigmoid(s)), g = sigmoid(s).
    The argument is clamped at +/-30 so 32-bit training stays finite.
    """
    s = min(max(s, -SIGMOID_CLAMP), SIGMOID_CLAMP)
    sig = 1.0 / (1.0 + math.exp(-s))
    if positive:
        return math.log1p(math.exp(-s)), sig - 1.0
    return math.log1p(math.exp(s)), sig


def lr_schedule(lr0: float, progress: float) -> float:
    """Linear decay from lr0 to the 1e-4 floor over the whole run."""
    return lr0 * max(LR_FLOOR, 1.0 - progress)


def window_contexts(sentence_len: int, focus_index: int, window: int,
                    rng: Optional[np.random.Generator] = None,
                    fixed: bool = False) -> List[int]:
    """Context positions around the focus, clipped to the sentence.

    By default the effective width is drawn uniformly from {1..window}
    per focus; ``fixed`` pins it at ``window``.
    """
    if fixed:
        b = window
    else:
        b = int(rng.integers(1, window + 1))
    lo = max(0, focus_index - b)
    hi = min(sentence_len, focus_index + b + 1)
    return [j for j in range(lo, hi) if j != focus_index]


def _unit_weights(focus_units) -> Tuple[np.ndarray, np.ndarray]:
    """Unique unit ids with mean weights (multiplicity / list length)."""
    ids = np.asarray(focus_units, dtype=np.int64)
    uids, counts = np.unique(ids, return_counts=True)
    return uids, counts / ids.size


def _apply_step(input_m, output_m, uids, weights, context_word, negatives,
                lr, input_gate=None) -> float:
    """One SGD step; returns the summed pair loss.

    All pair gradients are computed against the pre-update rows, then the
    updates land in one sweep (duplicate negative ids accumulate).
    ``input_gate`` multiplies the unit-row update, gating frozen rows.
    """
    u = weights @ input_m[uids]
    n_neg = len(negatives)
    targets = np.empty(1 + n_neg, dtype=np.int64)
    targets[0] = context_word
    targets[1:] = negatives
    rows = output_m[targets]
    # pair math runs in float64 (weights are float64, so u already is) to
    # keep the log terms finite even where a float32 sigmoid saturates
    s = rows @ u
    np.clip(s, -SIGMOID_CLAMP, SIGMOID_CLAMP, out=s)
    np.exp(-s, out=s)
    sig = s
    sig += 1.0
    np.reciprocal(sig, out=sig)
    # -log sig for the positive pair, -log(1 - sig) for the negatives;
    # every gradient uses the pre-update rows (batch semantics)
    loss = -math.log(sig[0]) - float(np.log1p(-sig[1:]).sum())
    g = sig
    g[0] -= 1.0
    du = g @ rows
    deltas = ((lr * g)[:, None] * u[None, :]).astype(output_m.dtype)
    np.subtract.at(output_m, targets, deltas)
    if input_gate is not None:
        weights = weights * input_gate[uids]
    input_m[uids] -= (lr * weights)[:, None] * du[None, :]
    return loss


def step(model: Model, focus_units, context_word: int, negatives,
         lr: float, input_gate=None) -> float:
    """Spec-level step on explicit unit-id and word-id lists."""
    uids, weights = _unit_weights(focus_units)
    return _apply_step(model.input, model.output, uids, weights,
                       context_word, np.asarray(negatives, dtype=np.int64),
                       lr, input_gate)


def score(model: Model, unit_ids, word_id: int) -> float:
    """Dot product of the composed focus vector with one output row."""
    rows = model.input[np.asarray(unit_ids, dtype=np.int64)]
    return float(rows.mean(axis=0) @ model.output[word_id])


def _encode_corpus(corpus, vocab: Vocabulary, lenient: bool):
    """Resolve every sentence to word ids and per-token unit-id bundles.

    Tokens whose surface fell below min_count are dropped.  Distinct
    annotated tokens are cached, so repeated occurrences share one
    (unit ids, weights) pair.
    """
    unit_bundles = []
    cache = {}
    encoded = []
    empty = (np.empty(0, dtype=np.int64), np.empty(0))
    for sentence in corpus:
        wids = []
        bundles = []
        for token in sentence:
            wid = vocab.word_index.get(token.surface)
            if wid is None:
                continue
            idx = cache.get(token)
            if idx is None:
                keys = unit_keys(token, vocab.unit_config, lenient=lenient)
                ids = [vocab.unit_index[k] for k in keys if k in vocab.unit_index]
                idx = len(unit_bundles)
                unit_bundles.append(_unit_weights(ids) if ids else empty)
                cache[token] = idx
            wids.append(wid)
            bundles.append(idx)
        encoded.append((len(sentence),
                        np.asarray(wids, dtype=np.int64),
                        np.asarray(bundles, dtype=np.int64)))
    return encoded, unit_bundles


def _train_shard(model: Model, encoded, unit_bundles, table: NegativeTable,
                 p_discard: np.ndarray, config: TrainConfig,
                 rng: np.random.Generator, token_counters: list, worker: int,
                 total_tokens: int, input_gate_by_epoch, report: bool) -> None:
    """Train over one shard of sentences for all epochs.

    ``token_counters`` is shared across workers; reads of other workers'
    cells are unsynchronized by design (asynchronous-SGD contract).
    """
    input_m, output_m = model.input, model.output
    window, k = config.window, config.negatives
    fixed = config.fixed_window
    subsampling = config.subsample_t > 0
    denominator = float(config.epochs * total_tokens)
    decile = 0
    decile_loss = 0.0
    decile_steps = 0
    for epoch in range(config.epochs):
        input_gate = input_gate_by_epoch(epoch)
        for raw_len, wids, bundles in encoded:
            token_counters[worker] += raw_len
            progress = min(1.0, sum(token_counters) / denominator)
            lr = lr_schedule(config.lr0, progress)
            if subsampling and len(wids):
                keep = rng.random(len(wids)) >= p_discard[wids]
                kept_w = wids[keep]
                kept_b = bundles[keep]
            else:
                kept_w, kept_b = wids, bundles
            n = len(kept_w)
            for i in range(n):
                uids, weights = unit_bundles[kept_b[i]]
                if not uids.size:
                    continue
                positions = window_contexts(n, i, window, rng, fixed)
                if not positions:
                    continue
                # one block of uniform draws covers all contexts of this
                # focus; same semantics as sample_negatives per pair
                draws = cells[rng.integers(0, table_size, size=len(positions) * k)]
                for m, j in enumerate(positions):
                    ctx = kept_w[j]
                    negs = draws[m * k:(m + 1) * k]
                    decile_loss += _apply_step(input_m, output_m, uids, weights,
                                               ctx, negs[negs != ctx], lr,
                                               input_gate)
                    decile_steps += 1
            if report:
                while progress * 10 >= decile + 1 and decile < 10:
                    decile += 1
                    mean = decile_loss / decile_steps if decile_steps else float("nan")
                    log.info("progress %3d%%  lr %.5f  mean step loss %.5f",
                             decile * 10, lr, mean)
                    decile_loss, decile_steps = 0.0, 0
        if config.thread_count == 1:
            _check_finite(model)


def _check_finite(model: Model) -> None:
    if not np.isfinite(model.input).all() or not np.isfinite(model.output).all():
        raise NonFiniteParameter("NaN or Inf in model parameters")


def train(corpus: Iterable[Sentence], vocab: Vocabulary, config: TrainConfig,
          initial: Optional[Model] = None, lenient: bool = False) -> Model:
    """Run the negative-sampling skipgram objective over the corpus.

    The corpus is encoded once up front and then swept ``config.epochs``
    times; each surviving focus token is paired with the words inside its
    (possibly dynamic) window and ``config.negatives`` sampled negatives.
    With ``thread_count`` > 1, workers own disjoint sentence shards and
    update the shared matrices without locks, which is fast but not
    reproducible; single-threaded runs are pure functions of
    (corpus, config, seed).
    """
    if not vocab.words:
        raise EmptyVocabulary("vocabulary has no words")
    rng = np.random.default_rng(config.seed)
    model = initial if initial is not None else init_model(vocab, config, rng)
    if model.dim != config.dim:
        raise DimensionMismatch(
            f"model dimension {model.dim} != configured dim {config.dim}"
        )
    model.config = config
    encoded, unit_bundles = _encode_corpus(corpus, vocab, lenient)
    total_tokens = sum(raw for raw, _, _ in encoded)
    if total_tokens == 0:
        raise EmptyCorpus("training corpus is empty")
    table = build_negative_table(vocab)
    counts = vocab.counts
    p_discard = np.array(
        [discard_probability(int(c), vocab.total_tokens, config.subsample_t)
         for c in counts]
    )

    frozen_gate = None
    if (model.transferred_unit_ids is not None
            and config.freeze_transferred_epochs > 0):
        frozen_gate = np.ones(len(model.input))
        frozen_gate[model.transferred_unit_ids] = 0.0

    def input_gate_by_epoch(epoch: int):
        if frozen_gate is not None and epoch < config.freeze_transferred_epochs:
            return frozen_gate
        return None

    if config.thread_count == 1:
        _train_shard(model, encoded, unit_bundles, table, p_discard, config,
                     rng, [0], 0, total_tokens, input_gate_by_epoch, True)
    else:
        shards = [encoded[w::config.thread_count]
                  for w in range(config.thread_count)]
        counters = [0] * config.thread_count
        workers = [
            threading.Thread(
                target=_train_shard,
                args=(model, shards[w], unit_bundles, table, p_discard, config,
                      np.random.default_rng([config.seed, w]), counters, w,
                      total_tokens, input_gate_by_epoch, False),
            )
            for w in range(config.thread_count)
        ]
        for t in workers:
            t.start()
        for t in workers:
            t.join()
        _check_finite(model)
    return model


def finetune_init(lr_vocab: Vocabulary, hr_model: Model, config: TrainConfig,
                  rng: np.random.Generator, lang: str = "") -> Tuple[Model, dict]:
    """Initialize a low-resource model from high-resource unit vectors.

    Every unit key of ``lr_vocab`` that exists in the checkpoint's unit
    table (exact kind + text match) gets the learned row copied verbatim;
    the rest draw fresh uniform samples.  Output rows start at zero since
    word identities differ across languages.  Returns the model and a per-
    kind transfer report {kind: (copied, lr_total)}.
    """
    if config.dim != hr_model.dim:
        raise DimensionMismatch(
            f"checkpoint dimension {hr_model.dim} != configured dim {config.dim}"
        )
    missing_kinds = set(lr_vocab.unit_config.kinds) - set(hr_model.unit_config.kinds)
    if missing_kinds:
        names = ", ".join(str(UnitKind(k).name) for k in sorted(missing_kinds))
        raise ValueError(
            f"low-resource unit kinds not trained in the checkpoint: {names}"
        )
    model = init_model(lr_vocab, config, rng, unit_config=lr_vocab.unit_config,
                       dtype=hr_model.input.dtype)
    hr_index = hr_model.vocab.unit_index
    copied = {kind: 0 for kind in sorted(lr_vocab.unit_config.kinds)}
    totals = {kind: 0 for kind in sorted(lr_vocab.unit_config.kinds)}
    transferred = []
    for lr_id, key in enumerate(lr_vocab.units):
        totals[key.kind] = totals.get(key.kind, 0) + 1
        hr_id = hr_index.get(key)
        if hr_id is not None:
            model.input[lr_id] = hr_model.input[hr_id]
            copied[key.kind] = copied.get(key.kind, 0) + 1
            transferred.append(lr_id)
    model.transferred_unit_ids = np.asarray(transferred, dtype=np.int64)
    model.lang = lang
    report = {kind: (copied.get(kind, 0), totals.get(kind, 0))
              for kind in sorted(totals)}
    return model, report


# --------------------------------------------------------------------------
# Checkpoint serialization
# --------------------------------------------------------------------------

def format_floats(row) -> str:
    """Render a vector with exactly 6 digits after the decimal point.

    Byte-equality contracts (determinism, save/load identity) are defined
    on this rendering.
    """
    return " ".join(f"{x:.6f}" for x in row.tolist())


_TRUE = {"true", "1", "yes"}


def _header_items(model: Model) -> list:
    config = model.config or TrainConfig(dim=model.dim)
    vocab = model.vocab
    return [
        ("dim", model.dim),
        ("window", config.window),
        ("negatives", config.negatives),
        ("epochs", config.epochs),
        ("lr0", repr(config.lr0)),
        ("min_n", model.unit_config.min_n),
        ("max_n", model.unit_config.max_n),
        ("units", model.unit_config.kind_names()),
        ("seed", config.seed),
        ("lang", model.lang),
        ("min_count", config.min_count),
        ("subsample_t", repr(config.subsample_t)),
        ("fixed_window", str(config.fixed_window).lower()),
        ("freeze_transferred_epochs", config.freeze_transferred_epochs),
        ("total_tokens", vocab.total_tokens),
        ("sentence_count", vocab.sentence_count),
    ]


def save_checkpoint(model: Model, path=None) -> bytes:
    """Serialize model + vocabulary + metadata; returns the bytes.

    Layout: magic line, key=value header, blank line, UNITS section,
    WORDS section, trailing CRC32 line over everything above it.
    """
    _check_finite(model)
    lines = [CHECKPOINT_MAGIC]
    lines.extend(f"{key}={value}" for key, value in _header_items(model))
    lines.append("")
    lines.append(f"UNITS {len(model.vocab.units)}")
    for unit_id, key in enumerate(model.vocab.units):
        lines.append(f"{key.serialize()} {format_floats(model.input[unit_id])}")
    lines.append(f"WORDS {len(model.vocab.words)}")
    for word_id, entry in enumerate(model.vocab.words):
        lines.append(
            f"{entry.surface} {entry.count} {format_floats(model.output[word_id])}"
        )
    body = "\n".join(lines) + "\n"
    data = body.encode("utf-8")
    checksum = zlib.crc32(data)
    data += f"CRC32 {checksum:08x}\n".encode("ascii")
    if path is not None:
        with open(path, "wb") as handle:
            handle.write(data)
    return data


def load_checkpoint(source) -> Model:
    """Inverse of :func:`save_checkpoint`; accepts a path or raw bytes."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        with open(source, "rb") as handle:
            data = handle.read()
    lines = data.split(b"\n")
    if not lines or lines[0].decode("utf-8", errors="replace") != CHECKPOINT_MAGIC:
        raise IncompatibleFormatVersion(
            f"missing or unknown checkpoint magic (expected {CHECKPOINT_MAGIC!r})"
        )
    # Locate the CRC trailer: the last non-empty line.
    while lines and not lines[-1]:
        lines.pop()
    if not lines or not lines[-1].startswith(b"CRC32 "):
        raise ChecksumMismatch("checkpoint is truncated: no CRC32 trailer")
    crc_line = lines.pop()
    body = b"\n".join(lines) + b"\n"
    try:
        expected = int(crc_line.split()[1], 16)
    except (IndexError, ValueError) as err:
        raise ChecksumMismatch(f"unreadable CRC32 trailer: {crc_line!r}") from err
    actual = zlib.crc32(body)
    if actual != expected:
        raise ChecksumMismatch(
            f"checkpoint CRC mismatch: stored {expected:08x}, computed {actual:08x}"
        )
    text_lines = body.decode("utf-8").split("\n")
    try:
        return _parse_checkpoint(text_lines)
    except (IndexError, KeyError, ValueError) as err:
        raise IncompatibleFormatVersion(f"malformed checkpoint: {err}") from err


def _parse_checkpoint(lines: list) -> Model:
    pos = 1
    header = {}
    while lines[pos]:
        key, _, value = lines[pos].partition("=")
        header[key] = value
        pos += 1
    pos += 1  # blank separator
    unit_config = UnitConfig.from_names(
        header["units"], min_n=int(header["min_n"]), max_n=int(header["max_n"])
    )
    config = TrainConfig(
        dim=int(header["dim"]),
        window=int(header["window"]),
        negatives=int(header["negatives"]),
        epochs=int(header["epochs"]),
        lr0=float(header["lr0"]),
        min_n=int(header["min_n"]),
        max_n=int(header["max_n"]),
        min_count=int(header.get("min_count", DEFAULT_MIN_COUNT)),
        subsample_t=float(header.get("subsample_t", DEFAULT_SUBSAMPLE_T)),
        seed=int(header.get("seed", 1)),
        fixed_window=header.get("fixed_window", "false") in _TRUE,
        freeze_transferred_epochs=int(header.get("freeze_transferred_epochs", 0)),
    )
    tag, count = lines[pos].split()
    if tag != "UNITS":
        raise ValueError(f"expected UNITS section, found {lines[pos]!r}")
    n_units = int(count)
    pos += 1
    units = []
    input_rows = []
    for _ in range(n_units):
        name, _, numbers = lines[pos].partition(" ")
        units.append(parse_unit_key(name))
        input_rows.append(np.array(numbers.split(), dtype=np.float64))
        pos += 1
    tag, count = lines[pos].split()
    if tag != "WORDS":
        raise ValueError(f"expected WORDS section, found {lines[pos]!r}")
    n_words = int(count)
    pos += 1
    words = []
    output_rows = []
    for _ in range(n_words):
        surface, word_count, numbers = lines[pos].split(" ", 2)
        words.append(WordEntry(surface, int(word_count)))
        output_rows.append(np.array(numbers.split(), dtype=np.float64))
        pos += 1
    dim = config.dim
    inp = (np.vstack(input_rows).astype(np.float32) if input_rows
           else np.zeros((0, dim), dtype=np.float32))
    out = (np.vstack(output_rows).astype(np.float32) if output_rows
           else np.zeros((0, dim), dtype=np.float32))
    if (inp.size and inp.shape[1] != dim) or (out.size and out.shape[1] != dim):
        raise ValueError("vector length disagrees with the declared dimension")
    vocab = Vocabulary(
        words=words, units=units,
        total_tokens=int(header.get("total_tokens", 0)),
        sentence_count=int(header.get("sentence_count", 0)),
        unit_config=unit_config,
    )
    return Model(input=inp, output=out, unit_config=unit_config, vocab=vocab,
                 config=config, lang=header.get("lang", ""))
