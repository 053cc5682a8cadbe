from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values
from pydantic import ValidationError
from pydantic_settings import BaseSettings

from app.exceptions import UsageError

ENV_PREFIX = "FEEDBACK_"


class Settings(BaseSettings):
    seed: int = 42
    split_ratio: float = 0.8
    log_level: str = "INFO"
    stopwords_path: Optional[str] = None

    # n-gram models
    min_df: int = 1
    chi2_top_k: Optional[int] = None
    nb_alpha: float = 1.0
    maxent_sigma2: float = 10.0
    maxent_learning_rate: float = 0.1
    maxent_epochs: int = 300
    maxent_tolerance: float = 1e-6

    # word2vec
    w2v_dimension: int = 300
    w2v_window: int = 5
    w2v_negative: int = 5
    w2v_epochs: int = 5
    w2v_learning_rate: float = 0.025
    w2v_min_count: int = 1

    # recurrent networks
    lstm_layers: int = 2
    lstm_hidden: int = 128
    lstm_epochs: int = 10
    lstm_learning_rate: float = 0.02
    lstm_dropout: float = 0.4
    lstm_clip_norm: float = 5.0
    lstm_peephole: bool = True
    lstm_fine_tune: bool = False

    class Config:
        env_file = ".env"
        env_prefix = ENV_PREFIX
        extra = "ignore"


def read_config_file(path: str) -> Dict[str, Any]:
    """Read a key=value config file into Settings field names."""
    if not Path(path).is_file():
        raise UsageError(f"Config file not found: {path}")

    known = set(Settings.model_fields)
    values: Dict[str, Any] = {}
    for raw_key, value in dotenv_values(path).items():
        key = raw_key.strip().lower()
        if key.startswith(ENV_PREFIX.lower()):
            key = key[len(ENV_PREFIX):]
        if key not in known:
            raise UsageError(f"Unknown config key '{raw_key}' in {path}")
        values[key] = value
    return values


def load_settings(config_path: Optional[str] = None, **overrides: Any) -> Settings:
    """Build Settings: overrides beat the config file, which beats env and defaults."""
    values: Dict[str, Any] = read_config_file(config_path) if config_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Settings(**values)
    except ValidationError as e:
        raise UsageError(f"Invalid configuration: {e}") from e


settings = Settings()
