"""Pipeline engine, run context and the per-modality stage runners."""

from app.core.context import RunContext
from app.core.pipeline_engine import (
    PipelineEngine,
    STAGE_ARTIFACTS,
    STAGE_HANDLERS,
    register_stage_handler,
    upstream_stages,
)

# Stage handlers register themselves on import of app.core.stages

__all__ = [
    'RunContext',
    'PipelineEngine',
    'STAGE_ARTIFACTS',
    'STAGE_HANDLERS',
    'register_stage_handler',
    'upstream_stages',
]
