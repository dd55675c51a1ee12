from dataclasses import (
    dataclass,
    field,
)
from typing import (
    Any,
    Iterable,
    Iterator,
    List,
)

from .logger import logger


@dataclass(frozen=True, order=True)
class Diagnostic:
    """A single compiler message anchored at a byte offset of a source file."""

    offset: int
    file: str = field(compare=False)
    message: str = field(compare=False)
    severity: str = field(default="error", compare=False)

    def __str__(self) -> str:
        return f"{self.file}:{self.offset}: {self.severity}: {self.message}"


class DiagnosticList:
    """Diagnostics of one compilation, kept sorted by offset."""

    def __init__(self, diagnostics: Iterable[Diagnostic] = ()) -> None:
        self._items: List[Diagnostic] = sorted(diagnostics)

    def add(self, file: str, offset: int, message: str, severity: str = "error") -> None:
        self._items.append(Diagnostic(offset, file, message, severity))
        self._items.sort()

    def extend(self, other: "DiagnosticList") -> None:
        self._items.extend(other)
        self._items.sort()

    @property
    def has_errors(self) -> bool:
        return any(d.severity == "error" for d in self._items)

    def __iter__(self) -> Iterator[Diagnostic]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __str__(self) -> str:
        return "\n".join(str(d) for d in self._items)


class CtxlangException(Exception):
    """Base exception class for ctxlang with automatic logging."""

    def __init__(self, message: str, *args: Any, **kwargs: Any) -> None:
        """Initialize exception and log it.

        Args:
            message (str): Error message
            *args: Additional positional arguments for Exception
            **kwargs: Additional keyword arguments. Special keys:
                     - log_level: Logging level (default: error)
                     - exc_info: Exception info to include in log
        """
        super().__init__(message, *args)

        log_level = kwargs.pop("log_level", "error")
        exc_info = kwargs.pop("exc_info", None)

        log_func = getattr(logger, log_level)
        log_func(message, exc_info=exc_info)


class CtxCompileError(CtxlangException):
    """Raised when a program cannot be compiled. Carries the diagnostics."""

    def __init__(self, diagnostics: DiagnosticList, *args: Any, **kwargs: Any) -> None:
        self.diagnostics = diagnostics
        super().__init__(str(diagnostics), *args, **kwargs)


class CtxSyntaxError(CtxCompileError):
    """Raised when a file does not follow the declaration grammar."""


class CtxLinkError(CtxCompileError):
    """Raised when imports cannot be resolved."""


class CtxTypeError(CtxCompileError):
    """Raised when a body, an expression or the main block does not type-check."""


class PriorityCycleError(CtxlangException):
    """Raised when merged operator priorities admit no total order."""

    def __init__(self, cycle: List[str], *args: Any, **kwargs: Any) -> None:
        self.cycle = cycle
        super().__init__("invalid operator priorities: " + " < ".join(cycle), *args, **kwargs)


class CtxFault(CtxlangException):
    """Raised when a running program faults."""

    def __init__(self, message: str, provenance: str = "", *args: Any, **kwargs: Any) -> None:
        self.fault_message = message
        self.provenance = provenance
        kwargs.setdefault("log_level", "debug")
        text = f"fault: {message} at {provenance}" if provenance else f"fault: {message}"
        super().__init__(text, *args, **kwargs)


class CtxValueError(CtxlangException):
    """Raised when a value error occurs."""


class CtxFileNotFoundError(CtxlangException):
    """Raised when a file is not found."""
