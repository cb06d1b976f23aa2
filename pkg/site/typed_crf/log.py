"""Logging setup for the command line."""

import logging

from rich.console import Console
from rich.logging import RichHandler

LEVELS = {0: logging.WARNING, 1: logging.INFO}


def setup_logging(verbosity=0, console=None):
    """Attach a rich handler to the package logger.

    Calling it again only updates the level.
    """
    logger = logging.getLogger("typed_crf")
    logger.setLevel(LEVELS.get(verbosity, logging.DEBUG))
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=console or Console(stderr=True),
            show_path=False,
            rich_tracebacks=True,
        )
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
    return logger
