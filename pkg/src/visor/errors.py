"""Exception taxonomy shared across the service.

Every error carries the numeric status used on the wire:
0 success, 1 validation, 2 not-found, 3 conflict, 4 decode, 5 internal,
6 aborted-due-to-earlier-error (never raised, only reported).
"""

STATUS_OK = 0
STATUS_VALIDATION = 1
STATUS_NOT_FOUND = 2
STATUS_CONFLICT = 3
STATUS_DECODE = 4
STATUS_INTERNAL = 5
STATUS_ABORTED = 6


class VisorError(Exception):
    status = STATUS_INTERNAL


class ValidationError(VisorError):
    status = STATUS_VALIDATION


class NotFoundError(VisorError):
    status = STATUS_NOT_FOUND


class TypeConflictError(ValidationError):
    """Property value type differs from the type fixed for (class, name)."""


class UnknownNodeError(NotFoundError):
    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"unknown node: {node_id}")


class UnknownEdgeError(NotFoundError):
    def __init__(self, edge_id):
        self.edge_id = edge_id
        super().__init__(f"unknown edge: {edge_id}")


class TransactionConflictError(VisorError):
    """Write-write conflict with a concurrently committed transaction."""

    status = STATUS_CONFLICT


class TransactionStateError(ValidationError):
    """Operation on a transaction that is closed or has the wrong mode."""


class StoreClosedError(VisorError):
    pass


class CorruptStoreError(VisorError):
    """Persistent file failed structural or checksum validation."""


class UnsupportedFormatError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class InvalidOpError(ValidationError):
    """Transform parameters invalid for the image they are applied to."""


class DecodeError(VisorError):
    status = STATUS_DECODE


class UnknownLocatorError(NotFoundError):
    def __init__(self, locator):
        self.locator = locator
        super().__init__(f"unknown blob locator: {locator}")


class DuplicateSetError(ValidationError):
    pass


class UnknownSetError(NotFoundError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown descriptor set: {name}")


class NoLabeledEntriesError(ValidationError):
    pass
