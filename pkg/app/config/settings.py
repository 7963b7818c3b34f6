"""
Centralized configuration management using Pydantic Settings.
Validates environment variables on startup and provides typed config access.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from typing import List, Optional


class Settings(BaseSettings):
    """
    Pipeline settings with validation.
    Loads from environment variables with fallback to .env file.
    """

    # Run Configuration
    default_seed: int = Field(default=7, description="Seed used when no --seed is given")
    output_dir: str = Field(default="./runs/default", description="Default artifact directory")
    pipeline_threads: int = Field(
        default=1,
        description="Worker threads for batch inference (env PIPELINE_THREADS)"
    )

    # Logging
    log_level: str = Field(default="info", description="Minimum structlog level")
    log_format: str = Field(default="json", description="json or console")

    # Text encoder (toy scale)
    text_num_encoders: int = 2
    text_num_heads: int = 4
    text_model_dim: int = 64
    text_key_dim: int = 16
    text_ffn_dim: int = 256
    text_max_len: int = 128
    text_dropout: float = 0.1
    vocab_size: int = Field(default=4096, description="Whole-word entries in the built vocabulary")

    # Audio model
    audio_num_classes: int = 16
    audio_pre_lstm_units: int = 32
    audio_post_lstm_units: int = 64
    audio_attention_units: int = 10
    audio_classifier_videos: int = Field(
        default=48, description="Training videos whose moment labels train the sound classifier"
    )

    # Image model
    image_height: int = 54
    image_width: int = 96
    image_combiner_lstm_units: int = 32
    image_expand_ratio: int = 4

    # Optimizer (Adam)
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 16
    max_train_steps: int = 400
    eval_interval: int = 20
    run_ablations: bool = Field(
        default=True, description="Also train the audio variants and the 2- and 3-frame image models"
    )

    # Fusion
    ridge_lambda_grid: List[float] = Field(
        default_factory=lambda: [10 ** (-4 + 6 * k / 9) for k in range(10)],
        description="Validation grid for the penalty strength"
    )
    coordinate_descent_tol: float = 1e-8
    coordinate_descent_max_sweeps: int = 10000

    # Statistics
    significance_level: float = 0.05
    weak_significance_level: float = 0.1
    separation_threshold: float = 15.0
    logit_tol: float = 1e-10
    logit_max_iter: int = 100
    cluster_by_influencer: bool = False
    benjamini_hochberg: bool = False

    # Outcomes
    sentiment_threshold: Optional[float] = Field(
        default=None,
        description="Override for the sentiment cut-off; corpus median when unset"
    )

    # Learning patterns
    micro_subscriber_max: int = 100_000
    mega_subscriber_min: int = 1_000_000
    learning_min_group_videos: int = 10

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    def validate_critical_config(self):
        """
        Validate critical configuration on startup.
        Raises ValueError listing every violated invariant.
        """
        errors = []

        if self.text_num_heads * self.text_key_dim != self.text_model_dim:
            errors.append(
                f"text_num_heads * text_key_dim must equal text_model_dim "
                f"({self.text_num_heads} * {self.text_key_dim} != {self.text_model_dim})"
            )

        if not 0.0 <= self.text_dropout < 1.0:
            errors.append("text_dropout must lie in [0, 1)")

        if not 0 < self.significance_level < self.weak_significance_level < 1:
            errors.append("significance levels must satisfy 0 < strong < weak < 1")

        if self.micro_subscriber_max >= self.mega_subscriber_min:
            errors.append("micro_subscriber_max must be below mega_subscriber_min")

        if self.pipeline_threads < 1:
            errors.append("PIPELINE_THREADS must be at least 1")

        for name in ("image_height", "image_width", "audio_num_classes", "batch_size", "max_train_steps"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be positive")

        if self.pipeline_threads > 1:
            import structlog
            logger = structlog.get_logger()
            logger.info(
                "parallel_inference_enabled",
                threads=self.pipeline_threads,
                message="Batch inference is parallel; training stays single-threaded"
            )

        if errors:
            raise ValueError(f"Configuration errors: {', '.join(errors)}")


# Global settings instance
settings = Settings()
