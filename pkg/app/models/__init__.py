"""Data models and schemas."""

from app.models.schemas import (
    Outcome,
    OutcomeKind,
    OUTCOME_ORDER,
    Modality,
    TextField,
    PredictionSource,
    SliceWhich,
    SoundCategory,
    ItemCategory,
    FrameTag,
    FRAME_TAGS,
    CombinerArch,
    LinearKind,
    PlantTarget,
    ItemBoxRecord,
    FrameRef,
    MediaRefs,
    VideoRecord,
    OutcomeVector,
    PlantEffect,
    PlantSpec,
    EncoderConfig,
    AudioModelConfig,
    ImageModelConfig,
    TrainConfig,
    RunConfig,
)
from app.models.results import (
    SignificanceTier,
    Verdict,
    FitTerm,
    FitResult,
    RelationshipRecord,
    HypothesisSet,
    LearningContrast,
    PDPBounds,
    Scorecard,
    VarianceShare,
)

__all__ = [
    # Enums
    'Outcome',
    'OutcomeKind',
    'OUTCOME_ORDER',
    'Modality',
    'TextField',
    'PredictionSource',
    'SliceWhich',
    'SoundCategory',
    'ItemCategory',
    'FrameTag',
    'FRAME_TAGS',
    'CombinerArch',
    'LinearKind',
    'PlantTarget',
    # Records
    'ItemBoxRecord',
    'FrameRef',
    'MediaRefs',
    'VideoRecord',
    'OutcomeVector',
    'PlantEffect',
    'PlantSpec',
    # Configs
    'EncoderConfig',
    'AudioModelConfig',
    'ImageModelConfig',
    'TrainConfig',
    'RunConfig',
    # Results
    'SignificanceTier',
    'Verdict',
    'FitTerm',
    'FitResult',
    'RelationshipRecord',
    'HypothesisSet',
    'LearningContrast',
    'PDPBounds',
    'Scorecard',
    'VarianceShare',
]
