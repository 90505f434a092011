"""Logging service for the command line and the experiment tasks."""

# License: MIT

import logging
import sys


def setup_logging(level: int | str = logging.INFO) -> None:
    """
    Configure the logging for the application.

    Log records go to stderr so that result JSON printed on stdout stays machine-readable.

    :param level: The logging level to set, as a number or a level name. Defaults to INFO.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )
