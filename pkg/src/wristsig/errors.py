"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from :class:`WristSigError`.
:class:`DataError` marks problems with user-supplied data (bad files, bad
recordings, impossible configurations); the CLI maps those to exit code 3.
"""

from __future__ import annotations


class WristSigError(Exception):
    """Base class for all toolkit errors."""


class DataError(WristSigError):
    """Input data violates a documented contract."""


# signal core / dtw
class NonFiniteInput(DataError):
    def __init__(self, message: str = "input contains NaN or infinite values", dimension=None):
        if dimension is not None:
            message = f"{message} (dimension {dimension})"
        super().__init__(message)
        self.dimension = dimension


class EmptySequence(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# features
class EmptyReferenceSet(DataError):
    pass


class NotEnoughGenuineSamples(DataError):
    def __init__(self, message: str, user_id=None):
        super().__init__(message)
        self.user_id = user_id


# classifiers
class SingleClassTrainingSet(DataError):
    pass


class FeatureWidthMismatch(DataError):
    pass


class CorruptModelFile(DataError):
    pass


class UnsupportedVersion(DataError):
    pass


class NonConvergenceWarning(UserWarning):
    """Logistic training hit the iteration cap; the best iterate is still returned."""


# evaluation
class SingleClassScores(DataError):
    pass


class CorpusShapeError(DataError):
    pass


# synthetic data
class InvalidParams(DataError):
    pass


# ingest / store
class MalformedHeader(DataError):
    pass


class NonMonotonicTimestamps(DataError):
    pass


class RaggedRow(DataError):
    pass


class EmptyRecording(DataError):
    pass


class ManifestNotFound(DataError):
    pass


class VersionMismatch(DataError):
    pass


class CorpusError(DataError):
    """Aggregates every problem found while loading a corpus."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        head = f"{len(self.problems)} problem(s) in corpus"
        super().__init__(head + ":\n  " + "\n  ".join(self.problems))


class UserAlreadyEnrolled(DataError):
    pass


class UnknownUser(DataError):
    pass


class EmptyEnrollment(DataError):
    pass


class CorruptStoreFile(DataError):
    pass


# service
class ReplayRejected(WristSigError):
    pass


class MalformedRecording(DataError):
    pass
