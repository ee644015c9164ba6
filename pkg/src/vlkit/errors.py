"""Exception hierarchy shared by every vlkit module."""


class VlkitError(Exception):
    """Base class for all errors raised by vlkit."""


class ConfigError(VlkitError, ValueError):
    """Invalid configuration values or unknown configuration keys."""


class InputError(VlkitError, ValueError):
    """Input data violates an operation's preconditions."""


class RecordParseError(InputError):
    """A JSONL line could not be parsed into a record."""

    def __init__(self, message, offset, line_no=None):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
        self.line_no = line_no


class LayoutReferenceError(VlkitError, LookupError):
    """An image placeholder references a plan that was not supplied."""


class OutOfCropError(InputError):
    """A coordinate falls outside the selected crop."""


class TransportError(VlkitError, ConnectionError):
    """A remote judge or model endpoint failed to answer."""


class BudgetExceededError(VlkitError, RuntimeError):
    """A client has exhausted its configured call budget."""


class SkipRecord(VlkitError):
    """A transform declined to produce output for a record."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason
