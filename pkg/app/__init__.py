"""Multimodal content-effect discovery for short advertising videos."""

# Core components
from app.core import PipelineEngine, RunContext

# Models and schemas
from app.models import (
    Outcome,
    PredictionSource,
    RunConfig,
    SliceWhich,
    VideoRecord,
    HypothesisSet,
    Scorecard,
)

# Errors
from app.errors import PipelineError

# Configuration
from app.config import settings, build_run_config

__version__ = "1.0.0"

__all__ = [
    # Core
    'PipelineEngine',
    'RunContext',
    # Models
    'Outcome',
    'PredictionSource',
    'RunConfig',
    'SliceWhich',
    'VideoRecord',
    'HypothesisSet',
    'Scorecard',
    # Errors
    'PipelineError',
    # Config
    'settings',
    'build_run_config',
]
