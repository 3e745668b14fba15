# seawaylib/config.py
import logging
import os
import sys
from pathlib import Path

try:
    if sys.version_info >= (3, 11):
        import tomllib as tomli  # type: ignore
    else:
        import tomli  # type: ignore
    import tomli_w  # type: ignore

    HAS_TOML = True
except ImportError:
    print(
        "Warning: tomli/tomli_w packages not found. Scenario and parameter files cannot be read.",
        file=sys.stderr,
    )
    print("Install with: pip install tomli tomli-w", file=sys.stderr)
    HAS_TOML = False

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "ASV_LOG_LEVEL"
TRACE = 5
logging.addLevelName(TRACE, "TRACE")

LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
    "trace": TRACE,
}

DEFAULT_CONFIG = {"default_scenario": None, "out_dir": "runs", "log_level": "info"}


def read_toml(path):
    """Parse a TOML file into a dict. Raises OSError / ValueError on failure."""
    if not HAS_TOML:
        raise RuntimeError("TOML support not available (pip install tomli tomli-w)")
    with open(path, "rb") as f:
        return tomli.load(f)  # type: ignore


def parse_toml(text):
    if not HAS_TOML:
        raise RuntimeError("TOML support not available (pip install tomli tomli-w)")
    return tomli.loads(text)  # type: ignore


def dump_toml(data):
    """Serialize `data` to TOML text; None values are dropped (TOML has no null)."""
    if not HAS_TOML:
        raise RuntimeError("TOML support not available (pip install tomli tomli-w)")
    return tomli_w.dumps(_drop_none(data))  # type: ignore


def _drop_none(value):
    if isinstance(value, dict):
        return {k: _drop_none(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_drop_none(v) for v in value]
    return value


def get_config_path():
    """Get the path to the config file following XDG Base Directory spec."""
    xdg_config_home = os.environ.get("XDG_CONFIG_HOME")
    if xdg_config_home:
        config_dir = Path(xdg_config_home) / "seaway"
    else:
        config_dir = Path.home() / ".config" / "seaway"
    return config_dir / "config.toml"


def load_config():
    """Load configuration from file with fallback to defaults."""
    config = dict(DEFAULT_CONFIG)
    if not HAS_TOML:
        return config
    config_path = get_config_path()
    if not config_path.exists():
        return config
    try:
        config.update(read_toml(config_path))
    except Exception as e:
        logger.error("Error loading config file %s: %s", config_path, e)
    return config


def save_config(config):
    """Save the configuration to the config file."""
    if not HAS_TOML:
        return
    config_path = get_config_path()
    try:
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, "w") as f:
            f.write(dump_toml(config))
    except Exception as e:
        logger.error("Error saving config file %s: %s", config_path, e)


def resolve_log_level(level=None):
    """Pick the log level: argument, then $ASV_LOG_LEVEL, then user config, then info."""
    name = level or os.environ.get(LOG_LEVEL_ENV) or load_config().get("log_level") or "info"
    name = str(name).strip().lower()
    if name not in LOG_LEVELS:
        logger.warning("Unknown log level %r, using info", name)
        name = "info"
    return LOG_LEVELS[name]


def configure_logging(level=None, stream=None):
    """Install one stderr handler on the package logger; safe to call repeatedly."""
    root = logging.getLogger("seawaylib")
    for handler in list(root.handlers):
        if getattr(handler, "_seaway", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._seaway = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(resolve_log_level(level))
    return root
