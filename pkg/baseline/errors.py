from typing import Optional


class LedgerError(Exception):
    """Base class for every data error raised while loading, replaying or sampling a ledger."""


class InvalidAddress(LedgerError):
    pass


class InvalidAmount(LedgerError):
    pass


class InvalidSnapshot(LedgerError):
    pass


class ZeroShares(LedgerError):
    pass


class MissingState(LedgerError):
    pass


class ZeroPool(MissingState):
    """Raised when a conversion hits a block whose total pooled ether is zero."""


class UnorderedInput(LedgerError):
    pass


class DuplicateKey(LedgerError):
    def __init__(self, key, message: Optional[str] = None):
        self.key = key
        super().__init__(message or f"duplicate (block, log_index) key {key}")


class InsufficientBalance(LedgerError):
    pass


class NonMonotonicBlock(LedgerError):
    pass


class EmptyAccount(LedgerError):
    pass


class ZeroSupply(LedgerError):
    pass


class MissingTimeIndex(LedgerError):
    pass


class InvalidCategoryTable(LedgerError):
    pass


class ParseError(LedgerError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class RpcError(LedgerError):
    def __init__(self, message: str, code: Optional[int] = None, transient: bool = False):
        self.code = code
        self.transient = transient
        super().__init__(message if code is None else f"[{code}] {message}")


class DecodeError(LedgerError):
    pass


class ArchiveRequired(RpcError):
    """The endpoint cannot serve historical state for the requested block."""


class OrphanCheckpoint(LedgerError):
    """A checkpoint points past rows that are no longer in the output file."""


class InvalidConfig(Exception):
    """Configuration problem; the CLI reports it as a usage error."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid config field '{field}': {message}")
