"""Word embeddings composed from linguistically motivated subword units.

Word vectors are the mean of unit vectors (character n-grams, phoneme
n-grams, whole phonemic forms, lemmas, morphological tags, or the word
itself), trained with the skipgram negative-sampling objective.  Two
cross-lingual transfer regimes are built in: joint training on a merged
upsampled bilingual corpus, and fine-tune initialization of a low-resource
model from a high-resource checkpoint.
"""

from .corpus import (
    AnnotatedToken,
    CorpusStats,
    FileCorpus,
    corpus_stats,
    merge_joint,
    parse_token,
    read_corpus,
    upsample_factor,
)
from .errors import SubgramError
from .evaluate import (
    CoverageReport,
    QueryResult,
    corpus_log_likelihood,
    cosine,
    export_vectors,
    import_vectors,
    nearest_neighbors,
    pca2,
    softmax_probability,
    unit_coverage,
    word_vector,
)
from .subword import UnitConfig, UnitKey, UnitKind, compose, extract_ngrams, unit_keys
from .trainer import (
    Model,
    TrainConfig,
    finetune_init,
    init_model,
    load_checkpoint,
    lr_schedule,
    pair_loss,
    save_checkpoint,
    score,
    step,
    train,
    window_contexts,
)
from .vocab import (
    NegativeTable,
    Vocabulary,
    build_negative_table,
    build_vocab,
    discard_probability,
    sample_negatives,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedToken", "CorpusStats", "FileCorpus", "corpus_stats",
    "merge_joint", "parse_token", "read_corpus", "upsample_factor",
    "SubgramError",
    "CoverageReport", "QueryResult", "corpus_log_likelihood", "cosine",
    "export_vectors", "import_vectors", "nearest_neighbors", "pca2",
    "softmax_probability", "unit_coverage", "word_vector",
    "UnitConfig", "UnitKey", "UnitKind", "compose", "extract_ngrams",
    "unit_keys",
    "Model", "TrainConfig", "finetune_init", "init_model", "load_checkpoint",
    "lr_schedule", "pair_loss", "save_checkpoint", "score", "step", "train",
    "window_contexts",
    "NegativeTable", "Vocabulary", "build_negative_table", "build_vocab",
    "discard_probability", "sample_negatives",
    "__version__",
]
