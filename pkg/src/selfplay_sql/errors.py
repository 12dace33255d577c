"""Exception hierarchy shared by all modules."""


class SelfPlayError(Exception):
    """Base class for toolkit errors."""


class FormatError(SelfPlayError):
    """Input file does not follow the expected format."""


class InvariantError(SelfPlayError):
    """Loaded data violates a structural invariant."""


class SqlSyntaxError(SelfPlayError):
    def __init__(self, message, position=None, expected=()):
        self.position = position
        self.expected = tuple(expected)
        detail = message
        if position is not None:
            detail = f"{message} at offset {position}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class IncompleteInput(SqlSyntaxError):
    """Input ended before the query was complete."""


class BindError(SelfPlayError):
    """An identifier does not resolve; ``kind`` is ``unknown_identifier`` or ``scope``."""

    def __init__(self, message, candidates=(), span=None, kind="unknown_identifier"):
        self.candidates = tuple(candidates)
        self.span = span
        self.kind = kind
        if self.candidates:
            message += f" (did you mean: {', '.join(self.candidates)}?)"
        super().__init__(message)


class LengthMismatch(SelfPlayError):
    pass


class NoCompatibleTemplate(SelfPlayError):
    pass


class FillFailure(SelfPlayError):
    pass


class AgentUnreachable(SelfPlayError):
    pass


class AgentProtocolError(SelfPlayError):
    pass


class DegenerateInteraction(SelfPlayError):
    """The user simulator stopped before producing any turn."""


class CorpusError(SelfPlayError):
    """A query in a corpus failed to parse; carries its coordinates."""

    def __init__(self, interaction_index, turn_index, cause):
        self.interaction_index = interaction_index
        self.turn_index = turn_index
        self.cause = cause
        super().__init__(f"interaction {interaction_index}, turn {turn_index}: {cause}")
