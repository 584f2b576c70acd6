"""Client-side error types.

Transport-level connection failures surface as the distinct builtin
exceptions (`ConnectionRefusedError`, `TimeoutError`); everything the
client itself detects derives from ClientError.  Server-side command
errors are never raised: they come back as status fields in the response
list.
"""


class ClientError(Exception):
    pass


class ClientClosedError(ClientError):
    """The connection was closed; open a new one."""


class FrameError(ClientError):
    """The byte stream from the server is not a well-formed frame."""


class ProtocolVersionError(FrameError):
    """Server speaks a different protocol version."""

    def __init__(self, ours: int, theirs: int):
        self.ours = ours
        self.theirs = theirs
        super().__init__(
            f"protocol version mismatch: client speaks {ours}, server sent {theirs}"
        )
