import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type

import psutil
from pydantic import Field
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_PATHS = (
    Path("config/settings.json"),
    Path("settings.json"),
)


def _default_workers() -> int:
    return psutil.cpu_count(logical=False) or 1


class RuntimeSettings(BaseSettings):
    """
    Process-level settings. Environment variables (``FRACTAL_SEARCH_*``)
    take precedence over values read from the settings file.
    """

    model_config = SettingsConfigDict(env_prefix="FRACTAL_SEARCH_", extra="ignore")

    log_level: str = "INFO"
    log_file: Optional[str] = None
    log_max_size: int = Field(default=10 * 1024 * 1024, gt=0)
    log_backup_count: int = Field(default=5, ge=0)
    workers: int = Field(default_factory=_default_workers, ge=1)
    dense_cap: int = Field(default=4096, ge=1)
    max_amplitudes: int = Field(default=200_000_000, ge=1)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return env_settings, init_settings, dotenv_settings, file_secret_settings


def _flatten(data: Dict[str, Any]) -> Dict[str, Any]:
    """Accept the nested ``{"logging": {"level": ...}}`` layout as well as flat keys."""
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    for key, value in data.get("logging", {}).items():
        flat[f"log_{key}"] = value
    return flat


def load_settings(config_path: Optional[str] = None) -> RuntimeSettings:
    """Read the settings file (first default path that exists) and the environment."""
    path = Path(config_path) if config_path else None
    if path is None:
        path = next((p for p in DEFAULT_SETTINGS_PATHS if p.exists()), None)

    data: Dict[str, Any] = {}
    if path is not None and os.path.exists(path):
        try:
            with open(path, "r") as f:
                data = _flatten(json.load(f))
            logger.info(f"Loading settings from {path}")
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Failed to load settings: {e}")
    elif config_path:
        logger.warning(f"Settings file not found: {config_path}")
    return RuntimeSettings(**data)
