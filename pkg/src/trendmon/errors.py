"""Exception types shared across the monitor."""


class TrendmonError(Exception):
    """Base class for all monitor errors."""


class IngestionError(TrendmonError):
    """Document source could not be read at all."""


class CorpusTooSmallError(TrendmonError):
    """Vocabulary is empty after min-count pruning."""


class TokenNotFoundError(TrendmonError, KeyError):
    """Query token is not in the vocabulary."""

    def __init__(self, token):
        super().__init__(token)
        self.token = token

    def __str__(self):
        return f"token not in vocabulary: {self.token!r}"


class TrainingDivergedError(TrendmonError):
    """Embedding loss became non-finite; caller may retry with a lower learning rate."""

    def __init__(self, epoch, message=None):
        super().__init__(message or f"training diverged at epoch {epoch}")
        self.epoch = epoch


class InsufficientDataError(TrendmonError):
    """Series too short (or every grid spec infeasible) for forecasting."""


class KeywordCoverageError(TrendmonError):
    """Every tracked keyword is out of vocabulary; filter and corpus disagree."""


class ProposalValidationError(TrendmonError):
    """A human edit introduced duplicates, unknown tokens, or blew the cap."""

    def __init__(self, reason, tokens=()):
        super().__init__(f"{reason}: {', '.join(tokens)}" if tokens else reason)
        self.reason = reason
        self.tokens = list(tokens)


class StaleProposalError(TrendmonError):
    """Proposal was already decided; later decisions are rejected."""


class RoundFailedError(TrendmonError):
    """Round refresh failed; the previous snapshot remains live."""


class IntervalNotElapsedError(TrendmonError):
    """Live mode refuses to refresh before the refresh interval has elapsed."""
