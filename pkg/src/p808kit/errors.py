"""Exception types shared across the toolkit."""


class P808Error(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(P808Error, ValueError):
    """An argument violates a precondition (wrong range, wrong rate, ...)."""


class DegenerateSignalError(P808Error, ValueError):
    """An audio signal is unusable where real content is required (e.g. zero RMS)."""


class ParseError(P808Error):
    """A file could not be parsed at all."""


class SchemaError(P808Error):
    """Structured input is missing required keys or columns.

    ``keys`` lists every offending key so callers see the full picture at once.
    """

    def __init__(self, message: str, keys=()):
        super().__init__(message)
        self.keys = tuple(keys)


class ConsistencyError(P808Error):
    """Catalog content violates a terminology rule."""

    def __init__(self, message: str, keys=()):
        super().__init__(message)
        self.keys = tuple(keys)


class RenderError(P808Error):
    """A text template could not be fully rendered."""


class ConfigurationError(P808Error):
    """Campaign or client configuration is invalid."""


class TransportError(P808Error):
    """A network backend was unreachable; the call may be retried."""


class NotFoundError(P808Error):
    """A referenced entity (campaign, session, clip) does not exist."""


class ConflictError(P808Error):
    """The operation conflicts with current state (e.g. duplicate submission)."""


class IncompleteSubmissionError(P808Error):
    """A submission does not answer every presented item."""


class ExcludedWorkerError(P808Error):
    """The worker has been excluded for a high rejection rate."""


class NoWorkError(P808Error):
    """No rateable clips remain for this worker."""


class UndefinedRateError(P808Error):
    """A rate was requested over an empty denominator."""


class InsufficientVotesError(P808Error):
    """A clip has fewer accepted votes than the campaign requires."""

    def __init__(self, clip_id: str, have: int, need: int):
        super().__init__(
            f"clip {clip_id!r} has {have} accepted votes, needs {need} ({need - have} short)"
        )
        self.clip_id = clip_id
        self.have = have
        self.need = need


class JoinError(P808Error):
    """Per-utterance inputs could not be joined; ``orphans`` lists the odd keys."""

    def __init__(self, message: str, orphans=()):
        super().__init__(message)
        self.orphans = tuple(orphans)


class IncompleteCampaignError(P808Error):
    """A simulated campaign ran out of rounds with clips still underrated."""

    def __init__(self, message: str, residual=(), rounds: int = 0):
        super().__init__(message)
        self.residual = tuple(residual)
        self.rounds = rounds
