from pydantic_settings import BaseSettings
from decouple import config
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent

class Settings(BaseSettings):
    """Process-wide defaults, each overridable through the environment or a .env file"""

    APP_NAME: str = config("APP_NAME", default="casanova-sim")

    # Logging
    LOG_LEVEL: str = config("LOG_LEVEL", default="WARNING")
    LOG_FILE: str = config("LOG_FILE", default="")

    # base dir to store run artifacts (traces, verdicts, dot files)
    OUTPUT_DIR: str = config("OUTPUT_DIR", default="./casanova_results")

    DEFAULT_SEED: int = config("DEFAULT_SEED", default=0, cast=int)

    # Explorer guard, number of canonical states visited before giving up
    EXPLORE_MAX_STATES: int = config("EXPLORE_MAX_STATES", default=200000, cast=int)

    BENCH_WORKERS: int = config("BENCH_WORKERS", default=1, cast=int)

settings = Settings()
