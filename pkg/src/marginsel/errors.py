"""Exception types shared across the package.

Each class carries a short ``category`` string that the command-line front end
prints so failures can be parsed by scripts.
"""


class MarginselError(Exception):
    category = "error"


class DomainError(MarginselError, ValueError):
    """An input lies outside the domain of a kernel or constraint set."""

    category = "domain"


class DimensionError(MarginselError, ValueError):
    """Array shapes or histogram lengths disagree."""

    category = "dimension"


class InputError(MarginselError, ValueError):
    """Structurally invalid data: empty bags, single-class labels, etc."""

    category = "input"


class ParseError(MarginselError, ValueError):
    category = "parse"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class SolverError(MarginselError, RuntimeError):
    """The dual solver failed to reach its tolerance inside a training loop."""

    category = "solver"
