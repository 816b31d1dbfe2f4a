"""Exception types shared across the package."""


class Shapley3DError(Exception):
    """Base class for all package errors."""


class DegenerateInput(Shapley3DError, ValueError):
    """Input violates general position (duplicates, collinear triples, coplanar quadruples)."""


class KernelWindowError(Shapley3DError, IndexError):
    """A kernel was evaluated outside its declared valid window."""


class EmptyQueueError(Shapley3DError, IndexError):
    pass


class SizeLimitError(Shapley3DError, ValueError):
    pass


class ParseError(Shapley3DError, ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class EmptyInputError(Shapley3DError, ValueError):
    pass
