from dataclasses import dataclass


@dataclass(frozen=True, kw_only=True)
class SourceSpan:
    """
    Position of a token in a model source text.

    Attributes:
        line: 1-based line number.
        column: 1-based column number.
        offset: 0-based character offset into the source text.
    """

    line: int
    column: int
    offset: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class PcfpError(ValueError):
    """Base class of all errors raised while analysing, reducing or exploring a program."""


class EvaluationError(PcfpError):
    """An expression could not be evaluated (unbound variable, division by zero)."""


class ProbabilityError(PcfpError):
    """A probability expression evaluated outside of [0, 1]."""


class ParseError(PcfpError):
    """
    A model text could not be parsed.

    Attributes:
        message: The bare error message, without position.
        span: The position of the offending token, if known.
    """

    message: str
    span: SourceSpan | None

    def __init__(self, message: str, span: SourceSpan | None = None) -> None:
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}" if span is not None else message)


class RenameError(PcfpError):
    """A variable renaming is not applicable to the program."""


class LabelNotExcludedError(PcfpError):
    """A label refers to a variable that a reduction would be allowed to rewrite."""


class ResetValueError(PcfpError):
    """A reset value lies outside of its variable's domain or names an unknown variable."""


class DistributionError(PcfpError):
    """The probabilities of an enabled command do not sum to one."""


class OutOfRangeError(PcfpError):
    """An assignment produced a value outside of its target's declared domain."""


class CapacityError(PcfpError):
    """State-space exploration exceeded the configured number of states."""


class UndeclaredVariableError(PcfpError):
    """A variable named by the caller is not declared in the program."""
