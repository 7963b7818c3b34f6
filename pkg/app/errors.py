"""
Exception hierarchy shared by every pipeline component.
"""

from typing import Dict, List, Optional


class PipelineError(Exception):
    """Base class for all errors raised by the pipeline"""

    pass


class ShapeError(PipelineError, ValueError):
    """Raised when tensor or array shapes are not conformable"""

    pass


class DomainError(PipelineError, ValueError):
    """Raised when a value lies outside the domain of an operation"""

    pass


class DataError(PipelineError, ValueError):
    """Raised when an input record or file violates its contract"""

    pass


class SpecError(PipelineError, ValueError):
    """Raised for invalid or contradictory configuration"""

    pass


class SingularDesignError(PipelineError):
    """Raised when a design matrix is rank deficient"""

    def __init__(self, message: str, aliased: Optional[List[str]] = None):
        self.aliased = list(aliased or [])
        if self.aliased:
            message = f"{message}: aliased columns {', '.join(self.aliased)}"
        super().__init__(message)


class ConvergenceError(PipelineError):
    """Raised when an iterative fit fails to converge"""

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(f"{message} ({self.diagnostics})" if self.diagnostics else message)


class UndefinedImportanceError(PipelineError):
    """Raised when importance shares are requested for all-zero coefficients"""

    pass


class UndefinedShareError(PipelineError):
    """Raised when the full model does not improve on its baseline"""

    pass


class KeyMismatchError(PipelineError):
    """Raised when step results cannot be aligned by key"""

    pass


class MissingArtifactError(PipelineError):
    """Raised when a stage runs before the stage that produces its inputs"""

    def __init__(self, stage: str, missing: str, producer: str):
        self.stage = stage
        self.missing = missing
        self.producer = producer
        super().__init__(
            f"Stage '{stage}' needs {missing}; run `{producer}` first"
        )


class InvalidStageTransitionError(PipelineError):
    """Raised when attempting an invalid stage state transition"""

    pass
