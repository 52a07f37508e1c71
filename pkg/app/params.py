import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import yaml

DEFAULT_PARAMS_PATH = Path(__file__).parent / "config" / "solver_defaults.yaml"


def load_params(path: str | Path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


@lru_cache(maxsize=1)
def get_params() -> Dict[str, Any]:
    """Default parameter mapping, read once per process."""
    return load_params(os.getenv("MEU_PARAMS_PATH", str(DEFAULT_PARAMS_PATH)))


def section(name: str) -> Dict[str, Any]:
    return get_params().get(name, {}) or {}
