from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="TPM_",
        extra="ignore",
    )

    app_name: str = "Taylor Predictive Monitor"
    log_level: str = "INFO"
    out_dir: Path = Path("runs")

    default_steps: int = 5000
    default_substeps: int = 10
    default_seed: int = 0

    default_degrees: list[int] = Field(default_factory=lambda: [2])
    default_horizons: list[int] = Field(default_factory=lambda: [50])
    ablation_degrees: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])

    latency_percentiles: list[float] = Field(default_factory=lambda: [50.0, 99.0])


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
