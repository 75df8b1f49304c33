"""Exception types raised by the editing stack."""


class MemeditError(Exception):
    """Base class for all library errors."""


class EmptyBatchError(MemeditError):
    """A loss or training call received an empty batch."""


class DegenerateDatasetError(MemeditError):
    """A training dataset cannot support the requested objective."""


class TargetTooLongError(MemeditError):
    """A target sequence exceeds the predictor's answer-slot count."""


class DuplicateEditIdError(MemeditError):
    """An edit id collides with one already stored."""


class StaleClassifierError(MemeditError):
    """Cached edit embeddings were computed under different classifier weights."""


class ExplicitEditUnsupportedError(MemeditError):
    """The fine-tuning baseline only accepts input/target pair edits."""


class InsufficientPoolError(MemeditError):
    """Hard-negative mining needs a larger candidate pool."""


class TooFewTopicsError(MemeditError):
    """Sentiment data generation needs at least three topics to split."""


class MissingResponsesError(MemeditError):
    """Sentiment scoring needs both correct- and incorrect-sentiment responses."""


class NoInScopeSamplesError(MemeditError):
    """Edit success is undefined without in-scope samples."""


class ScopeSoundnessError(MemeditError):
    """A generated record violates the definition of edit scope."""
