"""
Dysasr Errors

Exception types shared across the toolkit. Each one also subclasses the
closest builtin, so callers that catch ValueError or FileNotFoundError
still work.
"""


class DysasrError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DysasrError, ValueError):
    """Experiment or preset configuration cannot be resolved."""


class ManifestError(DysasrError, ValueError):
    """A manifest line failed to parse or broke a record invariant."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class MissingStageError(DysasrError, FileNotFoundError):
    """An upstream stage output (checkpoint, manifest, ...) does not exist."""

    def __init__(self, stage: str, artifact: str):
        self.stage = stage
        self.artifact = artifact
        super().__init__(f"missing {artifact}: run the '{stage}' stage first")


class NumericalError(DysasrError, ArithmeticError):
    """Training diverged (loss or gradient not finite)."""

    def __init__(self, message: str, batch_id: int | None = None):
        self.batch_id = batch_id
        suffix = f" (batch {batch_id})" if batch_id is not None else ""
        super().__init__(f"{message}{suffix}")


class AlignmentError(DysasrError, ValueError):
    """Forced alignment is impossible, e.g. fewer frames than HMM states."""


class AugmentationError(DysasrError, ValueError):
    """Augmentation policies are incompatible (duplicate augmentation key)."""
