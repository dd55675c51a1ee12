"""
ctxlang - a small statically typed language with user-defined, context-sensitive operators

Programs import DSL classes whose operators have mixfix syntax (``"if-exists" "(" _ ")" _``),
generic names bound at the use site, and operands typed ``D |- T``: expressions parsed and
evaluated with the instance operators of ``D`` in scope. A type-directed packrat parser picks,
at every sub-expression, only the operators whose result type fits.

Key Components:
    - CtxlangConfig: search paths, virtual filesystem and parser tracing options
    - Compiler: read, link, check and lower a program
    - CtxlangRunnable: compile and run programs as a LangChain runnable
    - RunResult: exit code and console output of a run
    - VirtualFS: the in-memory files a program may open
"""

from pydantic import ValidationError

from .__version__ import __version__  # noqa: F401
from .compiler import (
    Compilation,
    Compiler,
    CtxlangConfig,
)
from .exceptions import (
    CtxCompileError,
    CtxFault,
    CtxFileNotFoundError,
    CtxlangException,
    CtxLinkError,
    CtxSyntaxError,
    CtxTypeError,
    CtxValueError,
    PriorityCycleError,
)
from .runnable import (
    CtxlangInput,
    CtxlangRunnable,
)
from .runtime import (
    RunResult,
    VirtualFS,
)


__all__ = [
    "Compilation",
    "Compiler",
    "CtxlangConfig",
    "CtxlangInput",
    "CtxlangRunnable",
    "RunResult",
    "VirtualFS",
    "CtxlangException",
    "CtxCompileError",
    "CtxSyntaxError",
    "CtxLinkError",
    "CtxTypeError",
    "PriorityCycleError",
    "CtxFault",
    "CtxValueError",
    "CtxFileNotFoundError",
    "ValidationError",
]
