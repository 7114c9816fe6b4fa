from __future__ import annotations
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigError


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="IAH_", extra="ignore")

    app_name: str = "instance-aware-hashing"
    log_level: str = "INFO"

    encode_workers: int = 1
    progress: bool = False

    default_config: str | None = None

settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SceneConfig(_Section):
    """Synthetic scene generator parameters."""
    categories: int = Field(4, ge=2)
    height: int = Field(32, ge=8)
    width: int = Field(32, ge=8)
    channels: int = Field(1, ge=1)
    min_objects: int = Field(1, ge=1)
    max_objects: int = Field(3, ge=1)
    # relative weight of each object count min..max; empty means uniform
    count_weights: List[float] = Field(default_factory=list)
    min_box: int = Field(8, ge=2)
    max_box: int = Field(14, ge=2)
    max_overlap: float = Field(0.3, ge=0.0, le=1.0)
    stripe_period: float = Field(4.0, gt=0.0)
    noise: float = Field(0.25, ge=0.0, le=1.0)
    proposals: int = Field(16, ge=1)
    copies_per_object: int = Field(2, ge=1)
    jitter: float = Field(0.1, ge=0.0, le=0.2)
    placement_retries: int = Field(200, ge=1)
    train_size: int = Field(2000, ge=1)
    database_size: int = Field(800, ge=1)
    query_size: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _check_counts(self) -> "SceneConfig":
        if self.min_objects > self.max_objects:
            raise ValueError("min_objects must not exceed max_objects")
        if self.max_objects > self.categories:
            raise ValueError("max_objects must not exceed categories")
        if self.proposals < self.max_objects:
            raise ValueError("proposals must be at least max_objects")
        if self.min_box > self.max_box:
            raise ValueError("min_box must not exceed max_box")
        if self.max_box > min(self.height, self.width):
            raise ValueError("max_box must fit inside the image")
        span = self.max_objects - self.min_objects + 1
        if self.count_weights and len(self.count_weights) != span:
            raise ValueError(f"count_weights needs {span} entries (one per object count)")
        if self.count_weights and (min(self.count_weights) < 0 or sum(self.count_weights) <= 0):
            raise ValueError("count_weights must be nonnegative with a positive sum")
        return self

    def count_distribution(self) -> List[float]:
        span = self.max_objects - self.min_objects + 1
        weights = self.count_weights or [1.0] * span
        total = float(sum(weights))
        return [w / total for w in weights]


class PyramidConfig(_Section):
    levels: List[int] = Field(default_factory=lambda: [2, 1])
    channels: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _check_levels(self) -> "PyramidConfig":
        if not self.levels:
            raise ValueError("levels must be nonempty")
        if any(g < 1 for g in self.levels):
            raise ValueError("every pyramid level must be >= 1")
        return self

    @property
    def dim(self) -> int:
        return self.channels * sum(g * g for g in self.levels)


class ModelConfig(_Section):
    hidden_channels: int = Field(8, ge=1)
    bits: int = Field(12, ge=1)
    semantic_bits: int = Field(48, ge=1)
    semantic_head: bool = True
    category_head: bool = True
    margin: float = Field(1.0, gt=0.0)


class TrainConfig(_Section):
    base_lr: float = Field(0.0001, ge=0.0)
    batch_size: int = Field(32, ge=2)
    iterations: int = Field(3000, ge=0)
    lr_drop_epochs: int = Field(30, ge=1)
    cls_weight: float = Field(1.0, ge=0.0)
    category_weight: float = Field(1.0, ge=0.0)
    semantic_weight: float = Field(1.0, ge=0.0)
    triplet_cap: int = Field(256, ge=1)
    category_triplets: int = Field(16, ge=1)
    log_every: int = Field(100, ge=1)


class RetrievalConfig(_Section):
    threshold: float = Field(0.2, ge=0.0, le=1.0)
    topk: int = Field(10, ge=1)


class EvaluationConfig(_Section):
    depths: List[int] = Field(default_factory=lambda: [10, 50, 100])
    random_control: bool = True

    @model_validator(mode="after")
    def _check_depths(self) -> "EvaluationConfig":
        if any(m < 1 for m in self.depths):
            raise ValueError("evaluation depths must be >= 1")
        return self


class RunConfig(_Section):
    """The whole run document; every artifact records its hash."""
    seed: int = Field(7, ge=0)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    pyramid: PyramidConfig = Field(default_factory=PyramidConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @model_validator(mode="after")
    def _check_shapes(self) -> "RunConfig":
        if not (self.model.semantic_head or self.model.category_head):
            raise ValueError("at least one of model.semantic_head / model.category_head must be enabled")
        return self


def config_hash(cfg: BaseModel) -> str:
    """SHA-256 of the canonical JSON form of a validated config."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _apply_override(doc: Dict[str, Any], assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override '{assignment}' has an empty key")
    node = doc
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{key}: '{part}' is not a section")
        node = child
    try:
        node[parts[-1]] = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"{key.strip()}: value '{raw}' is not valid YAML ({e.__class__.__name__})") from e


def format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def load_run_config(path: Optional[Path] = None, overrides: Optional[List[str]] = None) -> RunConfig:
    """Read a YAML run document, apply ``key=value`` overrides and validate."""
    doc: Dict[str, Any] = {}
    if path is None and settings.default_config:
        path = Path(settings.default_config)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: not valid YAML: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        doc = loaded
    for assignment in overrides or []:
        _apply_override(doc, assignment)
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e
