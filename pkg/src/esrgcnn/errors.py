"""Shared exception types."""


class ContractViolation(ValueError):
    """An argument violated an operation's documented contract."""


class ValveError(RuntimeError):
    """A super-resolution scale was requested that the model was not built for."""


class CorpusError(RuntimeError):
    """The image corpus is unusable: empty, or no image satisfies a precondition."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss."""
