import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Set

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

logger = logging.getLogger(__name__)


class MarkedPolicy(str, Enum):
    """How the marked vertex is chosen on each lattice."""
    CENTER = "center"
    CORNER = "corner"
    EXPLICIT = "explicit"


def parse_stage_range(text: str) -> List[int]:
    """Parse ``"4-10"``, ``"4,6,8"`` or ``"6"`` into a list of stages."""
    stages: List[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(p) for p in part.split("-", 1))
            stages.extend(range(lo, hi + 1))
        else:
            stages.append(int(part))
    return stages


class ExperimentConfig(BaseModel):
    """One experiment: gasket family, stages, search knobs and outputs."""

    embedding_dim: int = Field(default=2, ge=2, le=3)
    stage_range: List[int] = Field(default_factory=lambda: [4, 5, 6])
    t1: int = Field(default=2, ge=1)
    marked_vertex_policy: MarkedPolicy = MarkedPolicy.CENTER
    marked_vertex: Optional[int] = Field(default=None, ge=0)
    ancilla: bool = False
    horizon_plain: Optional[int] = Field(default=None, ge=1)
    horizon_tulsi: Optional[int] = Field(default=None, ge=1)
    horizon_factor_plain: float = Field(default=3.0, gt=0)
    horizon_factor_tulsi: float = Field(default=6.0, gt=0)
    fit_from: Optional[int] = Field(default=None, ge=1)
    output_dir: Path = Path("results")
    snapshot: bool = False
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator("stage_range", mode="before")
    @classmethod
    def _parse_stages(cls, value: Any) -> Any:
        if isinstance(value, (str, int)):
            return parse_stage_range(str(value))
        return value

    @field_validator("stage_range")
    @classmethod
    def _check_stages(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("stage_range must not be empty")
        if any(s < 1 for s in value):
            raise ValueError("stages must be >= 1")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("stage_range must be strictly ascending")
        return value

    @model_validator(mode="after")
    def _check_marked(self) -> "ExperimentConfig":
        if self.marked_vertex_policy == MarkedPolicy.EXPLICIT and self.marked_vertex is None:
            raise ValueError("marked_vertex is required when the policy is 'explicit'")
        return self

    def fit_stages(self) -> List[int]:
        """Stages entering the scaling fits (``fit_from`` onwards)."""
        if self.fit_from is None:
            return list(self.stage_range)
        return [s for s in self.stage_range if s >= self.fit_from]


class ConfigManager:
    """Loads and saves an ExperimentConfig as JSON."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path

    def load_config(self, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        """
        Load the config file (defaults when absent) and apply ``overrides``.

        Raises:
            ValueError: malformed JSON or values that fail validation.
        """
        data: Dict[str, Any] = {}
        if self.config_path and os.path.exists(self.config_path):
            try:
                with open(self.config_path, "r") as f:
                    data = json.load(f)
            except json.JSONDecodeError as e:
                logger.error(f"Failed to parse config {self.config_path}: {e}")
                raise ValueError(f"Malformed config file {self.config_path}: {e}") from e
            logger.info(f"Loaded experiment config from {self.config_path}")
        elif self.config_path:
            logger.warning(f"Config file not found: {self.config_path}, using defaults")

        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return ExperimentConfig(**data)
        except ValidationError as e:
            logger.error(f"Invalid experiment config: {e}")
            raise

    def save_config(self, config: ExperimentConfig, exclude: Optional[Set[str]] = None) -> Path:
        """Write ``config`` as JSON that ``load_config`` reads back unchanged."""
        path = Path(self.config_path or "experiment.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            f.write(config.model_dump_json(indent=2, exclude=exclude))
        logger.info(f"Saved experiment config to {path}")
        return path
