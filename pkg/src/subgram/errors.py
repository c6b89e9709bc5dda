"""Exception taxonomy shared across the package.

Errors fall into three families that the command-line layer maps to exit
codes: usage problems (handled by argparse), data problems (malformed
corpora, vocabularies, checkpoints) and numerical failures during training.
"""


class SubgramError(Exception):
    """Base class for all errors raised by this package."""


class MalformedToken(SubgramError):
    """A corpus token violates the annotated-token grammar."""


class ZeroLowResourceCorpus(SubgramError):
    """Upsampling requested against an empty low-resource corpus."""


class ReservedCharacter(SubgramError):
    """A string destined for n-gram extraction contains '<' or '>'."""


class MissingAnnotation(SubgramError):
    """A token lacks a field required by the enabled unit kinds."""


class EmptyUnitList(SubgramError):
    """Vector composition was asked to average zero vectors."""


class EmptyVocabulary(SubgramError):
    """No word survived the frequency threshold."""


class EmptyCorpus(SubgramError):
    """An operation that needs corpus content received none."""


class DimensionMismatch(SubgramError):
    """Vector or matrix dimensions disagree."""


class IncompatibleFormatVersion(SubgramError):
    """A checkpoint file carries an unknown magic or broken structure."""


class ChecksumMismatch(SubgramError):
    """A checkpoint file is truncated or fails CRC verification."""


class NonFiniteParameter(SubgramError):
    """A NaN or infinity appeared in the model parameters."""


class OovEmpty(SubgramError):
    """A query word composes to the zero vector (no known units)."""


class EmptyKind(SubgramError):
    """A coverage statistic was requested for a kind with no units."""


class DegenerateVariance(SubgramError):
    """PCA input has zero total variance."""


class MalformedVectorFile(SubgramError):
    """A word-vector text file violates the expected layout."""
