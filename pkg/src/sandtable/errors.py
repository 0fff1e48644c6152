"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: ValidationFailure and its kin exit 2,
everything else derived from SandtableError exits 1.
"""


class SandtableError(Exception):
    """Base class for all errors raised by this package."""


class ValidationFailure(SandtableError):
    """Input data (scenario, roster, config file) violates an invariant."""


class OrderingError(SandtableError):
    """A history append would break the strictly-increasing seq rule."""


class RosterError(SandtableError):
    """Reference to an agent id that does not resolve in the roster."""


class BackendError(SandtableError):
    """Base class for LLM backend failures."""


class TransportError(BackendError):
    """Network-level failure talking to a remote backend, after retries."""


class ConfigurationError(BackendError):
    """The backend is miswired: exhausted script, bad kind, missing field."""


class ReplayMissError(ConfigurationError):
    """Replay backend has no recorded exchange for the request hash."""

    def __init__(self, request_hash: str):
        super().__init__(f"no recorded exchange for request hash {request_hash}")
        self.request_hash = request_hash


class DegradedOutputError(BackendError):
    """The model answered, but the answer is unusable (empty, unparseable).

    Carries the raw completion so a human can inspect what came back.
    """

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class MailboxProtocolError(SandtableError):
    """Human-gateway protocol violation: double publish, stale seq, etc."""


class GameAborted(SandtableError):
    """A game run hit an unrecoverable error; partial transcript preserved."""

    def __init__(self, message: str, agent_id: str | None = None):
        super().__init__(message)
        self.agent_id = agent_id
