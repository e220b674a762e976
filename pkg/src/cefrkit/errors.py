"""Exception types shared across the toolkit."""


class CefrkitError(Exception):
    """Base class for all toolkit errors."""


class ConlluParseError(CefrkitError, ValueError):
    """Malformed CoNLL-U input. Carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConlluStructureError(ConlluParseError):
    """Structurally invalid sentence (dangling or self-referential HEAD)."""


class CorpusError(CefrkitError, ValueError):
    """Manifest or corpus-level problem (missing file, duplicate id, bad label)."""


class ConfigError(CefrkitError, ValueError):
    """Invalid configuration (bad experiment config, empty feature space, ...)."""


class DegenerateDocumentError(CefrkitError, ValueError):
    """Document unusable for the requested computation (e.g. no non-punctuation tokens)."""


class TrainingError(CefrkitError, ValueError):
    """Training cannot proceed (single class, shape mismatch, ...)."""
