"""Settings and run configuration."""

from app.config.settings import settings
from app.config.run_config import build_run_config, default_config_data

__all__ = [
    'settings',
    'build_run_config',
    'default_config_data',
]
