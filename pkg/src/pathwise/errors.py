"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class PathwiseError(Exception):
    """Base class; every pipeline failure carries a stable ``code``."""

    code = "E_INTERNAL"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        if self.context:
            extras = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
            return f"[{self.code}] {self.message} ({extras})"
        return f"[{self.code}] {self.message}"


class MalformedJsonError(PathwiseError):
    code = "E_MALFORMED_JSON"


class SchemaError(PathwiseError):
    """Diagram schema violation; carries the JSON path and a reason code."""

    code = "E_SCHEMA"

    def __init__(self, reason: str, path: str, message: str):
        super().__init__(message, reason=reason, path=path)
        self.reason = reason
        self.path = path


class BackendUnknownError(PathwiseError):
    code = "E_BACKEND_UNKNOWN"


class NoEntryError(PathwiseError):
    code = "E_NO_ENTRY"


class PathExplosionError(PathwiseError):
    code = "E_PATH_EXPLOSION"


class DictFormatError(PathwiseError):
    code = "E_DICT_FORMAT"


class DictDuplicateError(PathwiseError):
    code = "E_DICT_DUPLICATE"


class CqlLexError(PathwiseError):
    code = "E_LEX"

    def __init__(self, message: str, line: int, col: int):
        super().__init__(message, line=line, col=col)
        self.line = line
        self.col = col


class CqlParseError(PathwiseError):
    code = "E_PARSE"

    def __init__(self, message: str, line: int, col: int):
        super().__init__(message, line=line, col=col)
        self.line = line
        self.col = col


class DupBindingError(PathwiseError):
    code = "E_DUP_BINDING"


class ContextMismatchError(PathwiseError):
    code = "E_CTX_MISMATCH"


class MissingBindingError(PathwiseError):
    code = "E_MISSING_BINDING"


class CriticExhaustedError(PathwiseError):
    """Raised when the repair loop still fails at iteration 3.

    The final CriticOutcome is attached for inspection.
    """

    code = "E_CRITIC_EXHAUSTED"

    def __init__(self, message: str, outcome):
        super().__init__(message)
        self.outcome = outcome


class BundleError(PathwiseError):
    code = "E_BUNDLE"


class EvalTypeError(PathwiseError):
    code = "E_EVAL_TYPE"


class StartupCheckError(PathwiseError):
    code = "E_STARTUP_CHECK"
