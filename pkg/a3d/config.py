"""
Configuration for the A3D toolkit
Environment values come from .env / the process environment; CLI flags override them
"""

import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

# Fusion (3D CNN pipeline)
DEFAULT_W_SPATIAL = 0.6
DEFAULT_W_TEMPORAL = 0.4

# Joint inference gate
DEFAULT_GATE_THRESHOLD = 0.1

# Attribute candidate filters
DEFAULT_MIN_CONFIDENCE = 0.02
DEFAULT_MIN_SIDE_PX = 20
DEFAULT_PERSON_WORDS = ("person",)
DEFAULT_T_SIM = 0.5

# NetVLAD
DEFAULT_CLUSTERS = 8
DEFAULT_NETVLAD_ALPHA = 1.0

# Attribute pipeline schedule
ATTRIBUTE_SCHEDULE = {
    "initial_lr": 0.001,
    "decay_factor": 0.1,
    "decay_every_epochs": 10,
    "momentum": 0.7,
    "weight_decay": 0.0005,
    "max_epochs": 20,
    "batch_size": 32,
    "seed": 0,
}

# 3D CNN pipeline schedule
STREAM_SCHEDULE = {
    "initial_lr": 0.001,
    "decay_factor": 0.8,
    "decay_every_epochs": 10,
    "momentum": 0.0,
    "weight_decay": 0.0,
    "max_epochs": 50,
    "batch_size": 32,
    "seed": 0,
}

SCHEDULES = {"attribute": ATTRIBUTE_SCHEDULE, "stream": STREAM_SCHEDULE}

OUTPUT_DIR_ENV = "A3D_OUTPUT_DIR"
LOG_LEVEL_ENV = "A3D_LOG_LEVEL"
LOG_FILE_ENV = "A3D_LOG_FILE"


@dataclass(frozen=True)
class Settings:
    """Process-level settings resolved from the environment"""

    output_dir: str = "a3d_output"
    log_level: str = "INFO"
    log_file: Optional[str] = None


def load_settings(env_file: Optional[str] = None) -> Settings:
    """Load settings from .env file and environment variables"""
    load_dotenv(dotenv_path=env_file, override=False)

    return Settings(
        output_dir=os.getenv(OUTPUT_DIR_ENV) or "a3d_output",
        log_level=(os.getenv(LOG_LEVEL_ENV) or "INFO").upper(),
        log_file=os.getenv(LOG_FILE_ENV) or None,
    )
