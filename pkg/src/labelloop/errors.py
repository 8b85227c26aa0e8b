"""Exception hierarchy shared across all modules."""


class LabelLoopError(Exception):
    """Base class for all domain errors."""


# corpus
class MissingColumn(LabelLoopError):
    pass


class EmptyDataset(LabelLoopError):
    pass


class DuplicateDataset(LabelLoopError):
    pass


class DecodeError(LabelLoopError):
    pass


class InvalidName(LabelLoopError):
    pass


class EmptyQuery(LabelLoopError):
    pass


class UnknownDataset(LabelLoopError):
    pass


# store
class UnknownWorkspace(LabelLoopError):
    pass


class DuplicateWorkspace(LabelLoopError):
    pass


class UnknownElement(LabelLoopError):
    pass


class UnknownCategory(LabelLoopError):
    pass


class DuplicateCategory(LabelLoopError):
    pass


# learning
class EmptyCorpus(LabelLoopError):
    pass


class SingleClass(LabelLoopError):
    pass


class TooFewExamples(LabelLoopError):
    pass


class ModelNotReady(LabelLoopError):
    pass


class TrainingInProgress(LabelLoopError):
    pass


# policy
class NoPositives(LabelLoopError):
    pass


# quality
class InsufficientData(LabelLoopError):
    pass


# evaluation
class NoModel(LabelLoopError):
    pass


class NoPositivePredictions(LabelLoopError):
    pass


class IncompleteLabels(LabelLoopError):
    pass


class UnknownSession(LabelLoopError):
    pass


class SeedQueryTooSparse(LabelLoopError):
    pass
