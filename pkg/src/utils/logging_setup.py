"""
Console logging with coloured level names
"""

import logging
import sys

from colorama import Fore, Style, init as colorama_init

LEVEL_COLORS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}


class ColorFormatter(logging.Formatter):
    """Formatter that colours the level name"""

    def format(self, record: logging.LogRecord) -> str:
        color = LEVEL_COLORS.get(record.levelno, "")
        original = record.levelname
        record.levelname = f"{color}{original}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = original


def setup_logging(verbose: bool = False) -> None:
    """Install a single stderr handler on the root logger"""
    colorama_init()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_multhp", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler._multhp = True
    handler.setFormatter(ColorFormatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
