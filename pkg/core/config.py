"""
Configuration module for the GSOS workbench.

This module centralizes all environment variable access.
Values come from, in increasing priority:
  1. the defaults below,
  2. the key-value file named by WORKBENCH_CONFIG (dotenv syntax, KEY=VALUE per line),
  3. a .env file at the project root,
  4. the process environment.
"""

import os
from pathlib import Path

import dotenv

from core.logger import get_logger

logger = get_logger(__name__)

project_root = Path(__file__).parent.parent
dotenv_path = project_root / ".env"

if dotenv_path.exists():
    # override=False keeps real environment variables on top
    dotenv.load_dotenv(dotenv_path=dotenv_path, override=False)
    logger.debug(f"Loaded .env file from: {dotenv_path}")
else:
    logger.debug(f".env file not found at {dotenv_path}. Using system environment variables.")

config_file = os.getenv("WORKBENCH_CONFIG")
if config_file:
    if Path(config_file).exists():
        dotenv.load_dotenv(dotenv_path=config_file, override=False)
        logger.debug(f"Loaded workbench config from: {config_file}")
    else:
        logger.warning(f"WORKBENCH_CONFIG points at a missing file: {config_file}")


def _int_env(key: str, default: int) -> int:
    raw = os.getenv(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer value for {key}: {raw!r}")
        return default


ENV = os.getenv("ENV", "")

# ============================================================================
# Observation Defaults
# ============================================================================
DEFAULT_DEPTH = _int_env("DEFAULT_DEPTH", 6)
PROBE_SIZE = _int_env("PROBE_SIZE", 4)
PROBE_LIMIT = _int_env("PROBE_LIMIT", 6)
TERM_SIZE = _int_env("TERM_SIZE", 6)
SEED = _int_env("SEED", 42)
FUEL = _int_env("FUEL", 100)

# ============================================================================
# Engine Bounds
# ============================================================================
TYPE_BOUND = _int_env("TYPE_BOUND", 3)
DENOTE_FUEL = _int_env("DENOTE_FUEL", 10000)
STAGE_BOUND = _int_env("STAGE_BOUND", 2)
ITERATION_BOUND = _int_env("ITERATION_BOUND", 4)
STAGE_ELEMENT_CAP = _int_env("STAGE_ELEMENT_CAP", 200000)
UNIVERSE_CAP = _int_env("UNIVERSE_CAP", 5000)

# ============================================================================
# Suite Scales
# ============================================================================
ADEQUACY_PAIRS = _int_env("ADEQUACY_PAIRS", 1000)
ADEQUACY_MIN_DISTINGUISHED = _int_env("ADEQUACY_MIN_DISTINGUISHED", 50)
PENTAGON_SAMPLES = _int_env("PENTAGON_SAMPLES", 500)
DENOTATIONAL_SAMPLES = _int_env("DENOTATIONAL_SAMPLES", 100)
COMPOSITION_SAMPLES = _int_env("COMPOSITION_SAMPLES", 500)

# ============================================================================
# Files and API
# ============================================================================
RULES_DIR = Path(os.getenv("RULES_DIR", str(project_root / "rules")))
API_RATE_LIMIT = os.getenv("API_RATE_LIMIT", "100/minute")
cors_str = os.getenv("CORS_ORIGINS")
CORS_ORIGINS = cors_str.split(",") if cors_str else ["http://localhost", "http://localhost:3000"]
