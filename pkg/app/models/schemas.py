"""
Pydantic schemas for dataset records, model configurations and run configuration.
Includes the enums shared by every pipeline stage.
"""

from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Optional, Literal, Any, List, Dict
from enum import Enum
from datetime import datetime


# ============================================================================
# Enums
# ============================================================================


class Outcome(str, Enum):
    """The five modelled outcomes"""

    LOG_VIEWS = "log_views"
    LOG_ENGAGEMENT = "log_engagement"
    LOG_POPULARITY = "log_popularity"
    LOG_LIKEABILITY = "log_likeability"
    SENTIMENT = "sentiment_binary"

    @property
    def is_binary(self) -> bool:
        return self is Outcome.SENTIMENT

    @property
    def kind(self) -> "OutcomeKind":
        return OutcomeKind.BINARY if self.is_binary else OutcomeKind.CONTINUOUS

    @property
    def label(self) -> str:
        return OUTCOME_LABELS[self]


OUTCOME_LABELS = {
    Outcome.LOG_VIEWS: "Views",
    Outcome.SENTIMENT: "Sentiment",
    Outcome.LOG_ENGAGEMENT: "Engagement",
    Outcome.LOG_POPULARITY: "Popularity",
    Outcome.LOG_LIKEABILITY: "Likeability",
}

# Report order used by every table
OUTCOME_ORDER = [
    Outcome.LOG_VIEWS,
    Outcome.SENTIMENT,
    Outcome.LOG_ENGAGEMENT,
    Outcome.LOG_POPULARITY,
    Outcome.LOG_LIKEABILITY,
]


class OutcomeKind(str, Enum):
    """Prediction head family"""

    CONTINUOUS = "continuous"
    BINARY = "binary"


class Modality(str, Enum):
    """Unstructured data modalities"""

    TEXT = "text"
    AUDIO = "audio"
    IMAGE = "image"


class TextField(str, Enum):
    """Text fields, each with an independently trained model"""

    TITLE = "title"
    DESCRIPTION = "description_160"
    CAPTIONS = "captions_30s"


class PredictionSource(str, Enum):
    """The six unstructured prediction columns of the combined model"""

    TITLE = "title"
    DESCRIPTION = "description"
    CAPTIONS = "captions"
    AUDIO = "audio"
    THUMBNAIL = "thumbnail"
    FRAMES = "frames"

    @property
    def modality(self) -> Modality:
        if self in (PredictionSource.TITLE, PredictionSource.DESCRIPTION, PredictionSource.CAPTIONS):
            return Modality.TEXT
        if self is PredictionSource.AUDIO:
            return Modality.AUDIO
        return Modality.IMAGE

    @property
    def text_field(self) -> Optional[TextField]:
        return {
            PredictionSource.TITLE: TextField.TITLE,
            PredictionSource.DESCRIPTION: TextField.DESCRIPTION,
            PredictionSource.CAPTIONS: TextField.CAPTIONS,
        }.get(self)


class SliceWhich(str, Enum):
    """Which 30 s window of a video is analysed"""

    BEGINNING = "beginning"
    MIDDLE = "middle"
    END = "end"


class SoundCategory(str, Enum):
    """Sound categories; class probabilities are grouped into these"""

    HUMAN = "Human"
    MUSIC = "Music"
    SILENCE = "Silence"
    THINGS = "Things"
    ANIMAL = "Animal"
    SOURCE_AMBIGUOUS = "SourceAmbiguous"
    BACKGROUND = "Background"
    NATURAL = "Natural"


# Categories reported in Step 1; the rest enter as controls only
REPORTED_SOUND_CATEGORIES = [
    SoundCategory.HUMAN,
    SoundCategory.MUSIC,
    SoundCategory.SILENCE,
    SoundCategory.THINGS,
    SoundCategory.ANIMAL,
]


class ItemCategory(str, Enum):
    """Annotated item categories in images"""

    PERSONS = "Persons"
    CLOTHES_ACCESSORIES = "ClothesAccessories"
    HOME_KITCHEN = "HomeKitchen"
    ANIMAL = "Animal"
    OTHER_OBJECTS = "OtherObjects"
    PACKAGED_GOODS = "PackagedGoods"
    BRAND_LOGOS = "BrandLogos"


class FrameTag(str, Enum):
    """Timestamp tags for images of a slice"""

    THUMBNAIL = "thumbnail"
    T0 = "0s"
    T7_5 = "7.5s"
    T15 = "15s"
    T22_5 = "22.5s"
    T30 = "30s"

    @property
    def offset_seconds(self) -> Optional[float]:
        if self is FrameTag.THUMBNAIL:
            return None
        return float(self.value[:-1])


FRAME_TAGS = [FrameTag.T0, FrameTag.T7_5, FrameTag.T15, FrameTag.T22_5, FrameTag.T30]


class CombinerArch(str, Enum):
    """Multi-frame combination architectures"""

    BILSTM = "BiLSTM"
    MAX_GAP = "Max-GAP"
    GAP_MAX = "GAP-Max"
    C_GAP = "C-GAP"


class LinearKind(str, Enum):
    """Linear combiner family"""

    OLS = "ols"
    RIDGE = "ridge"
    LASSO = "lasso"
    ELASTIC_NET = "elastic_net"


class PlantTarget(str, Enum):
    """Where a planted synthetic effect acts"""

    ATTENTION = "attention"
    OUTCOME = "outcome"
    BOTH = "both"
    OUTCOME_CONFOUND_ONLY = "outcome_confound_only"


# ============================================================================
# Dataset Records
# ============================================================================


class ItemBoxRecord(BaseModel):
    """Annotated bounding box of one item in one image"""

    frame_tag: str = Field(..., description="thumbnail or the frame timestamp tag")
    category: ItemCategory
    x0: int = Field(..., ge=0)
    y0: int = Field(..., ge=0)
    x1: int = Field(..., description="Exclusive right edge")
    y1: int = Field(..., description="Exclusive bottom edge")
    slice: SliceWhich = SliceWhich.BEGINNING

    @model_validator(mode="after")
    def _check_box(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"Empty box ({self.x0},{self.y0})-({self.x1},{self.y1})")
        return self


class FrameRef(BaseModel):
    """One extracted frame of a video"""

    t: float = Field(..., ge=0, description="Timestamp in seconds")
    path: str


class MediaRefs(BaseModel):
    """Media file references for one video"""

    audio_path: Optional[str] = None
    thumbnail_path: Optional[str] = None
    frames: List[FrameRef] = Field(default_factory=list, description="Extracted frames, any order")
    boxes: List[ItemBoxRecord] = Field(default_factory=list)


class VideoRecord(BaseModel):
    """One video's structured features, raw modalities, annotations and observed outcomes"""

    video_id: str
    influencer_id: str
    category_id: str
    subscriber_count: int = Field(default=0, ge=0)

    # Counts
    views: int = Field(..., ge=0)
    comments: int = Field(..., ge=0)
    likes: int = Field(..., ge=0)
    dislikes: int = Field(..., ge=0)

    # Structured features
    video_length_min: float = Field(..., gt=0)
    tag_count: int = Field(default=0, ge=0)
    playlist_count: int = Field(default=0, ge=0)
    playlist_avg_position: float = 0.0
    playlist_avg_size: float = 0.0

    # Time covariates
    upload_timestamp: datetime
    scrape_timestamp: Optional[datetime] = None
    year: Optional[int] = None
    gap_scrape_days: float = 0.0
    gap_prev_days: float = 0.0
    gap_next_days: float = 0.0
    rank: int = 0
    day_of_week: Optional[int] = Field(default=None, ge=0, le=6)
    time_of_day_bucket: Optional[int] = Field(default=None, ge=0, le=5)

    captions_present: bool = False
    url_count_in_description: int = Field(default=0, ge=0)
    hashtag_in_description: bool = False

    # Text fields
    title: str = ""
    description_160: str = ""
    captions_30s: str = ""

    media: MediaRefs = Field(default_factory=MediaRefs)
    comment_sentiments: List[float] = Field(default_factory=list, max_length=25)

    @field_validator("description_160")
    @classmethod
    def _truncate_description(cls, value: str) -> str:
        return value[:160]

    @field_validator("comment_sentiments")
    @classmethod
    def _check_sentiments(cls, values: List[float]) -> List[float]:
        for value in values:
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"Comment sentiment {value} outside [-1, 1]")
        return values

    @model_validator(mode="after")
    def _derive_time_fields(self):
        ts = self.upload_timestamp
        if self.year is None:
            self.year = ts.year
        if self.day_of_week is None:
            self.day_of_week = ts.weekday()
        if self.time_of_day_bucket is None:
            self.time_of_day_bucket = ts.hour // 4
        return self

    def text(self, field: TextField) -> str:
        return getattr(self, field.value)

    @property
    def duration_seconds(self) -> float:
        return self.video_length_min * 60.0


class OutcomeVector(BaseModel):
    """The five outcomes of one video"""

    log_views: float
    log_engagement: float
    log_popularity: float
    log_likeability: float
    sentiment_binary: int = Field(..., ge=0, le=1)
    sentiment_score: float = Field(default=0.0, description="Mean comment score before binarization")

    def value(self, outcome: Outcome) -> float:
        return float(getattr(self, outcome.value))


# ============================================================================
# Synthetic Corpus Specification
# ============================================================================


class PlantEffect(BaseModel):
    """One planted effect of a synthetic corpus"""

    modality: Modality
    element: str = Field(..., description="Element key, e.g. captions_30s:brand, Music, Persons")
    target: PlantTarget
    outcome: Outcome
    magnitude: float = Field(..., description="Signed effect in outcome noise-SD units")

    @field_validator("magnitude")
    @classmethod
    def _finite(cls, value: float) -> float:
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("magnitude must be finite")
        return value


class PlantSpec(BaseModel):
    """Synthetic corpus specification with planted effects"""

    effects: List[PlantEffect] = Field(default_factory=list)
    corpus_size: int = Field(default=1620, ge=5)
    influencer_count: int = Field(default=33, ge=2)
    category_count: int = Field(default=11, ge=1)
    seed: int = 7
    noise_sd: float = Field(default=1.0, gt=0)
    audio_rate: int = Field(default=8000, description="Sample rate of the written WAV files")
    min_length_s: float = Field(default=30.0, ge=1.0)
    max_length_s: float = Field(default=60.0, ge=1.0)
    frame_rate: float = Field(default=15.0, gt=0, description="Nominal fps used for frame timestamps")
    slices: List[SliceWhich] = Field(default_factory=lambda: [SliceWhich.BEGINNING])
    image_height: int = 54
    image_width: int = 96
    brand_rate: float = Field(default=0.3, ge=0, le=1)
    brand_half: Optional[Literal["first", "second"]] = Field(
        default=None, description="Half of the text that receives brand mentions; random when unset"
    )

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.max_length_s < self.min_length_s:
            raise ValueError("max_length_s must be >= min_length_s")
        return self


# ============================================================================
# Model Configurations
# ============================================================================


class EncoderConfig(BaseModel):
    """Transformer encoder configuration"""

    num_encoders: int = Field(default=2, ge=1)
    num_heads: int = Field(default=4, ge=1)
    model_dim: int = 64
    key_dim: int = 16
    ffn_dim: int = 256
    max_len: int = 128
    dropout_p: float = Field(default=0.1, ge=0, lt=1)

    @model_validator(mode="after")
    def _check_heads(self):
        if self.num_heads * self.key_dim != self.model_dim:
            raise ValueError(
                f"num_heads * key_dim must equal model_dim ({self.num_heads}*{self.key_dim} != {self.model_dim})"
            )
        return self

    @classmethod
    def from_settings(cls, settings) -> "EncoderConfig":
        return cls(
            num_encoders=settings.text_num_encoders,
            num_heads=settings.text_num_heads,
            model_dim=settings.text_model_dim,
            key_dim=settings.text_key_dim,
            ffn_dim=settings.text_ffn_dim,
            max_len=settings.text_max_len,
            dropout_p=settings.text_dropout,
        )


class AudioModelConfig(BaseModel):
    """Moment classifier and sequence model configuration"""

    num_classes: int = 16
    stem_channels: int = 8
    block_channels: List[int] = Field(default_factory=lambda: [16, 32, 32])
    pre_lstm_units: int = 32
    post_lstm_units: int = 64
    attention_units: int = 10
    variant: Literal["full", "no_attention", "no_classifier"] = "full"

    @classmethod
    def from_settings(cls, settings) -> "AudioModelConfig":
        return cls(
            num_classes=settings.audio_num_classes,
            pre_lstm_units=settings.audio_pre_lstm_units,
            post_lstm_units=settings.audio_post_lstm_units,
            attention_units=settings.audio_attention_units,
        )


class ImageModelConfig(BaseModel):
    """Backbone and frame-combiner configuration"""

    height: int = 54
    width: int = 96
    stem_channels: int = 8
    block_channels: List[int] = Field(default_factory=lambda: [16, 16])
    block_strides: List[int] = Field(default_factory=lambda: [2, 1])
    expand_ratio: int = 4
    kernel_size: int = 3
    se_ratio: float = 0.25
    middle_units: int = 16
    lstm_units: int = 32
    arch: CombinerArch = CombinerArch.BILSTM

    @classmethod
    def from_settings(cls, settings) -> "ImageModelConfig":
        return cls(
            height=settings.image_height,
            width=settings.image_width,
            expand_ratio=settings.image_expand_ratio,
            lstm_units=settings.image_combiner_lstm_units,
        )


class TrainConfig(BaseModel):
    """Optimizer and schedule"""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    max_steps: int = 400
    eval_interval: int = 20
    seed: int = 7

    @classmethod
    def from_settings(cls, settings, seed: Optional[int] = None) -> "TrainConfig":
        return cls(
            learning_rate=settings.learning_rate,
            beta1=settings.adam_beta1,
            beta2=settings.adam_beta2,
            eps=settings.adam_eps,
            batch_size=settings.batch_size,
            max_steps=settings.max_train_steps,
            eval_interval=settings.eval_interval,
            seed=settings.default_seed if seed is None else seed,
        )


# ============================================================================
# Run Configuration
# ============================================================================


class RunConfig(BaseModel):
    """Everything a CLI command needs; loaded from JSON and overridden by flags"""

    dataset: Optional[str] = Field(default=None, description="Path to the dataset manifest (JSON lines)")
    slice: SliceWhich = SliceWhich.BEGINNING
    outcomes: List[Outcome] = Field(default_factory=lambda: list(OUTCOME_ORDER))
    seed: int = 7
    out: str = "./runs/default"
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    audio: AudioModelConfig = Field(default_factory=AudioModelConfig)
    image: ImageModelConfig = Field(default_factory=ImageModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    plant: Optional[PlantSpec] = None
    extras: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("outcomes")
    @classmethod
    def _unique_outcomes(cls, values: List[Outcome]) -> List[Outcome]:
        if not values:
            raise ValueError("At least one outcome is required")
        return list(dict.fromkeys(values))


# ============================================================================
# Pipeline Stages
# ============================================================================


class Stage(str, Enum):
    """CLI commands, in pipeline order"""

    SYNTH = "synth"
    TRAIN = "train"
    PREDICT = "predict"
    FUSE = "fuse"
    INTERPRET = "interpret"
    SCORE = "score"
    REPORT = "report"


class StageState(str, Enum):
    """Stage state machine states"""

    PENDING = "PENDING"
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"


class RunEventType(str, Enum):
    """Entries of the run event log"""

    STAGE_STARTED = "stage.started"
    STAGE_COMPLETED = "stage.completed"
    STAGE_FAILED = "stage.failed"
    ARTIFACT_WRITTEN = "artifact.written"


# Valid state transitions; a completed or failed stage may be re-run
STATE_TRANSITIONS = {
    StageState.PENDING: [StageState.RUNNING],
    StageState.RUNNING: [StageState.COMPLETED, StageState.FAILED],
    StageState.COMPLETED: [StageState.RUNNING],
    StageState.FAILED: [StageState.RUNNING],
}

# Upstream stages whose artifacts each stage reads
STAGE_DEPENDENCIES = {
    Stage.SYNTH: [],
    Stage.TRAIN: [],
    Stage.PREDICT: [Stage.TRAIN],
    Stage.FUSE: [Stage.PREDICT],
    Stage.INTERPRET: [Stage.PREDICT, Stage.FUSE],
    Stage.SCORE: [Stage.FUSE],
    Stage.REPORT: [Stage.PREDICT, Stage.INTERPRET],
}
