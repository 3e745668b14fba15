# seawaylib/resolution.py
import os
from typing import Optional

from seawaylib.config import HAS_TOML, load_config
from seawaylib.paths import shipped_scenario_path

SCENARIO_ENV = "SEAWAY_SCENARIO"


def _normalize(path: str) -> str:
    return os.path.abspath(os.path.expanduser(path))


def get_scenario_with_source(explicit: Optional[str] = None):
    """Resolve the scenario file with priority:
    1) explicit --scenario argument
    2) env var SEAWAY_SCENARIO
    3) config default_scenario
    4) the shipped narrow-channel scenario
    Returns (path:str|None, source:str, meta:dict).
    An explicit path is returned as given; the loader reports a missing file.
    """
    meta = {"env": os.environ.get(SCENARIO_ENV), "config": None}
    if HAS_TOML:
        meta["config"] = load_config().get("default_scenario")

    if explicit:
        return (_normalize(explicit), "arg", meta)

    if meta["env"]:
        path = _normalize(meta["env"])
        if os.path.isfile(path):
            return (path, "env", meta)
        return (None, "env_invalid", meta)

    if meta["config"]:
        path = _normalize(meta["config"])
        if os.path.isfile(path):
            return (path, "config", meta)
        return (None, "config_invalid", meta)

    return (str(shipped_scenario_path()), "shipped", meta)
