"""
Logging setup for the SGM-Net toolkit
Verbosity comes from SGMNET_LOG_LEVEL (optionally read from a .env file)
"""

import logging
import os
import sys
from typing import Optional, Union

from colorama import Fore, Style, just_fix_windows_console
from dotenv import load_dotenv

LOG_LEVEL_ENV = "SGMNET_LOG_LEVEL"

_LEVEL_COLORS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.MAGENTA,
}


class ColorFormatter(logging.Formatter):
    """Formatter that colors the level name"""

    def __init__(self, use_color: bool = True):
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        if not self.use_color:
            return super().format(record)
        saved = record.levelname
        color = _LEVEL_COLORS.get(record.levelno, "")
        record.levelname = f"{color}{saved}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = saved


def resolve_level(level: Optional[Union[str, int]] = None) -> int:
    """Turn a level name, number or the environment setting into a logging level"""
    if level is None:
        load_dotenv(override=False)
        level = os.environ.get(LOG_LEVEL_ENV, "INFO")
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).strip().upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logging(level: Optional[Union[str, int]] = None) -> logging.Logger:
    """Install one colored stream handler on the package root logger"""
    just_fix_windows_console()
    root = logging.getLogger("src")
    root.setLevel(resolve_level(level))
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ColorFormatter(use_color=sys.stderr.isatty()))
    root.addHandler(handler)
    root.propagate = False
    return root
