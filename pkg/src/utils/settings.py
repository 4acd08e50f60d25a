"""
Settings Module

Process-level settings read from the environment (prefix WAVEPP_) and .env.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Environment-driven settings shared by the CLI and workflows."""

    model_config = SettingsConfigDict(
        env_prefix="WAVEPP_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    threads: int = Field(default=1, ge=1, description="Max parallel sweep levels")
    log_level: str = "INFO"
    log_json: bool = False


@lru_cache
def get_settings() -> Settings:
    return Settings()
