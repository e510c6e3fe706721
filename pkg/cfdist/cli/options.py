import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from click import get_current_context
from toolz import merge
from typer import Option

from ..config.config import DEFAULTS_CONFIG
from ..config.constants import CONFIG_FILE_KEY, ConfigError
from ..config.paths import get_default_config_path


def _current_config_path() -> Optional[str]:
    ctx = get_current_context(True)
    return ctx.params.get(CONFIG_FILE_KEY) if ctx else None


@lru_cache
def get_config_params(config_path: Optional[str] = None) -> Dict:
    user_config_path = config_path or get_default_config_path()
    user_config = load_config_if_exists(str(user_config_path))

    # vae settings merge key by key so a partial block keeps the other defaults
    vae = merge(DEFAULTS_CONFIG.get("vae", {}), user_config.get("vae") or {})
    return merge(DEFAULTS_CONFIG, user_config, {"vae": vae})


def CliOption(yaml_key: str, *param_decls: str, envvar: Optional[str] = None, **kwargs: Any):
    """
    Creates a typer Option with value priority:
    1. CLI provided value (handled by typer)
    2. Environment variable CFDIST_<KEY>
    3. User config file value (if provided)
    4. defaults.yml value
    """

    return Option(
        *param_decls,
        default_factory=lambda: get_config_params(_current_config_path()).get(yaml_key),
        envvar=envvar or f"CFDIST_{yaml_key.upper()}",
        show_default=str(DEFAULTS_CONFIG.get(yaml_key)),
        **kwargs,
    )


@lru_cache
def load_config_if_exists(user_config_path: Optional[str]) -> dict:
    """
    Load a user config file (YAML, or JSON which parses as YAML).

    A missing file is not an error; an unreadable or malformed one is.
    """

    if not user_config_path:
        return {}

    path = Path(user_config_path)
    if not path.exists():
        logging.info(f"User config file {user_config_path} not found")
        return {}
    elif not path.is_file():
        raise ConfigError(f"User config path {user_config_path} is not a file")

    try:
        with open(path, "r", encoding="utf-8") as user_config_file:
            loaded = yaml.safe_load(user_config_file)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Failed to load user config file {user_config_path}: {e}") from e

    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"User config file {user_config_path} must hold a mapping, got {type(loaded).__name__}")
    unknown = set(loaded) - set(DEFAULTS_CONFIG)
    if unknown:
        logging.warning(f"Ignoring unknown config keys in {user_config_path}: {sorted(unknown)}")
    return loaded
