"""Exception types shared by all modules."""


class NrpqError(Exception):
    """Base class for user-facing errors (bad input, unsupported request)."""


class ParseError(NrpqError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class FragmentError(NrpqError):
    """An axiom falls outside the declared DL fragment."""


class InconsistentKBError(NrpqError):
    """An operation that needs a satisfiable KB was given an unsatisfiable one."""


class InvariantError(Exception):
    """An internal invariant was violated. Never caused by user input."""
