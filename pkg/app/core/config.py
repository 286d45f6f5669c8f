from pathlib import Path
from typing import Any, List, Literal, Mapping, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigError

CAPTION_ABLATIONS = ("none_att", "wa", "wsa", "full")
VQA_ABLATIONS = ("none_att", "qa", "sa", "full")
QUESTION_TYPES = ("object", "number", "color", "location")


class Settings(BaseSettings):
    # Base
    PROJECT_NAME: str = "Dual Attention API"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"

    # Browser origins allowed to call the API, as a JSON list; none by default
    CORS_ORIGINS: List[str] = []

    # Checkpoints served over HTTP
    CAPTION_CHECKPOINT: Optional[str] = None
    VQA_CHECKPOINT: Optional[str] = None

    # WUPS taxonomy; the shipped tree is used when unset
    TAXONOMY_PATH: Optional[str] = None

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


settings = Settings()


def _check_grid(grid_size: int, grid_h: int, grid_w: int) -> None:
    if grid_h != grid_w:
        raise ValueError(f"region grid must be square, got H={grid_h} W={grid_w}")
    if grid_size % (4 * grid_h):
        raise ValueError(
            f"grid_size {grid_size} must be a multiple of 4*H={4 * grid_h} "
            "(cells are drawn from 4x4 stencils)"
        )


class WorldConfig(BaseModel):
    """Knobs of the synthetic scene generator."""

    grid_size: int = Field(16, ge=4)
    grid_h: int = Field(4, ge=1)
    grid_w: int = Field(4, ge=1)
    min_objects: int = Field(1, ge=1, le=4)
    max_objects: int = Field(4, ge=1, le=4)
    captions_per_scene: int = Field(2, ge=1, le=3)
    questions_per_scene: int = Field(4, ge=0)
    object_share: float = Field(0.25, ge=0)
    number_share: float = Field(0.25, ge=0)
    color_share: float = Field(0.25, ge=0)
    location_share: float = Field(0.25, ge=0)
    min_count: int = Field(1, ge=1)
    concepts: int = Field(24, ge=1)

    @model_validator(mode="after")
    def check_consistency(self):
        _check_grid(self.grid_size, self.grid_h, self.grid_w)
        cells = self.grid_h * self.grid_w
        if self.max_objects > cells:
            raise ValueError(f"max_objects {self.max_objects} exceeds the {cells} grid cells")
        if self.min_objects > self.max_objects:
            raise ValueError(f"min_objects {self.min_objects} exceeds max_objects {self.max_objects}")
        if abs(sum(self.question_shares().values()) - 1.0) > 1e-9:
            raise ValueError("question type shares must sum to 1")
        return self

    def question_shares(self) -> dict[str, float]:
        return {
            "object": self.object_share,
            "number": self.number_share,
            "color": self.color_share,
            "location": self.location_share,
        }


class RunConfig(BaseModel):
    """One training run. Field names double as CLI flags and config-file keys."""

    task: Literal["caption", "vqa"] = "caption"
    ablation: Literal["none_att", "wa", "wsa", "full", "qa", "sa"] = "full"

    # dims
    grid_size: int = Field(16, ge=4)
    grid_h: int = Field(4, ge=1)
    grid_w: int = Field(4, ge=1)
    feature_dim: int = Field(32, ge=2)
    concepts: int = Field(24, ge=1)
    attention_dim: int = Field(32, ge=1)
    hidden_dim: int = Field(64, ge=1)
    question_dim: int = Field(32, ge=1)
    joint_dim: int = Field(32, ge=1)
    answers: Optional[int] = Field(None, ge=2)

    # optimizer
    optimizer: Literal["sgd", "rmsprop", "adam"] = "adam"
    learning_rate: float = Field(1e-3, ge=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    rho: float = Field(0.9, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    # global gradient norm cap applied before every update; off when unset
    clip_norm: Optional[float] = Field(None, gt=0)

    # schedule
    epochs: int = Field(30, ge=0)
    concept_epochs: int = Field(30, ge=0)
    # the concept phase stops at the first epoch whose mean loss is at or below this
    concept_target_loss: Optional[float] = Field(None, gt=0)
    # staircase decay: learning_rate · learning_rate_decay ** (epoch // epochs_per_decay)
    learning_rate_decay: float = Field(1.0, gt=0, le=1)
    epochs_per_decay: int = Field(1, ge=1)
    batch_size: int = Field(8, ge=1)
    seed: int = Field(0, ge=0)
    log_every: int = Field(10, ge=1)
    checkpoint_every: int = Field(0, ge=0)

    # model behaviour
    threshold: float = Field(0.6, gt=0, lt=1)
    attention_variant: Literal["softmax", "as_printed"] = "softmax"
    max_caption_len: int = Field(24, ge=1)
    beam_size: int = Field(1, ge=1)

    # VQA may reuse region encoder + semantic attention of a caption checkpoint
    shared_checkpoint: Optional[str] = None
    freeze_shared: bool = False

    @model_validator(mode="after")
    def check_consistency(self):
        _check_grid(self.grid_size, self.grid_h, self.grid_w)
        allowed = CAPTION_ABLATIONS if self.task == "caption" else VQA_ABLATIONS
        if self.ablation not in allowed:
            raise ValueError(f"ablation {self.ablation!r} is not valid for task {self.task!r}; expected one of {allowed}")
        if self.shared_checkpoint and self.task != "vqa":
            raise ValueError("shared_checkpoint only applies to vqa runs")
        return self

    @property
    def regions(self) -> int:
        return self.grid_h * self.grid_w


def parse_config(model: type[BaseModel], values: Mapping[str, Any]):
    """Validate `values` into `model`, turning validation failures into ConfigError."""
    try:
        return model.model_validate(dict(values))
    except ValidationError as exc:
        raise ConfigError(f"invalid {model.__name__}: {exc}") from None


def read_key_value_file(path) -> dict[str, str]:
    """Read a UTF-8 `key=value` file (comments with '#')."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path, encoding="utf-8")
    return {k: v for k, v in values.items() if v is not None and v != ""}


def load_config(model: type[BaseModel], path=None, overrides: Optional[Mapping[str, Any]] = None):
    """Defaults, then the key-value file, then explicit overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_key_value_file(path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - set(model.model_fields))
    if unknown:
        raise ConfigError(f"unknown {model.__name__} keys: {', '.join(unknown)}")
    return parse_config(model, values)


def write_key_value_file(config: BaseModel, path) -> None:
    lines = []
    for name, value in config.model_dump().items():
        if value is None:
            continue
        lines.append(f"{name}={str(value).lower() if isinstance(value, bool) else value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
