"""Exception hierarchy shared by every difflab module."""


class DifflabError(Exception):
    """Base class for all library errors."""


class ShapeError(DifflabError, ValueError):
    pass


class ArchitectureError(DifflabError, ValueError):
    pass


class DivergenceError(DifflabError, ArithmeticError):
    def __init__(self, epoch: int, detail: str = "non-finite loss"):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


class DomainError(DifflabError, ValueError):
    pass


class ConsistencyError(DifflabError, ValueError):
    pass


class ContractError(DifflabError, ValueError):
    """A documented precondition on the inputs was violated."""


class DegenerateGeometryError(DifflabError, ArithmeticError):
    pass


class DegenerateDataError(DifflabError, ArithmeticError):
    pass


class BracketError(DifflabError, ValueError):
    pass


class MonotonicityError(DifflabError, ArithmeticError):
    pass


class SpecError(DifflabError, ValueError):
    pass


class ConfigError(DifflabError, ValueError):
    pass


class DependencyError(DifflabError, FileNotFoundError):
    pass


class ParseError(DifflabError, ValueError):
    def __init__(self, message: str, offset: int | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.offset = offset
        self.path = path


class ValidationError(DifflabError, ValueError):
    pass
