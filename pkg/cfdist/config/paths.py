from datetime import datetime
from pathlib import Path

from platformdirs import user_data_dir

APP_NAME = "cfdist"
APP_AUTHOR = "cfdist"


def get_cfdist_home() -> Path:
    """Get the cfdist home directory, creating it if it doesn't exist.

    Returns platform-appropriate path:
    - Windows: C:\\Users\\<username>\\AppData\\Local\\cfdist\\cfdist
    - macOS: ~/Library/Application Support/cfdist
    - Linux: ~/.local/share/cfdist
    """
    data_dir = Path(user_data_dir(APP_NAME, APP_AUTHOR))
    data_dir.mkdir(parents=True, exist_ok=True)
    return data_dir


def get_default_config_path() -> Path:
    return get_cfdist_home() / "cfdist.conf.yaml"


def get_default_log_path() -> Path:
    return get_cfdist_home() / "logs" / "cfdist.log"


def get_default_run_dir(command: str) -> Path:
    return get_cfdist_home() / "runs" / f"{command}-{datetime.now().strftime('%Y%m%d-%H%M%S')}"
