"""Logging configuration for the ctxlang package.

Program output owns stdout, so every handler installed here writes to stderr or to a file.
The parser logs one record per memo evaluation at the custom ``TRACE`` level.
"""

import logging
import sys
from pathlib import Path
from typing import Union


TRACE = 5
logging.addLevelName(TRACE, "TRACE")

_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


class CtxlangLogger:
    """Owns the handlers of the ``ctxlang`` logger."""

    def __init__(self, name: str = "ctxlang"):
        """
        Args:
            name (str): Logger name, defaults to 'ctxlang'
        """
        self.logger = logging.getLogger(name)
        self._configure_default_logger()

    def _configure_default_logger(self) -> None:
        # an embedding application may have configured the logger already
        if self.logger.handlers:
            return
        self.logger.setLevel(logging.WARNING)
        stderr_handler = logging.StreamHandler(sys.stderr)
        stderr_handler.setLevel(TRACE)
        stderr_handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATE_FORMAT))
        self.logger.addHandler(stderr_handler)

    def setup_file_logging(self, log_file: Union[str, Path] = "ctxlang.log") -> None:
        """Also write the log to ``log_file``, at the level currently in effect.

        Args:
            log_file (str | Path): Path to log file. Defaults to 'ctxlang.log'.
        """
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(min(self.logger.level, logging.INFO))
        file_handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATE_FORMAT))
        self.logger.addHandler(file_handler)

    def set_level(self, level: int) -> None:
        """Set logging level.

        Args:
            level (int): Logging level (e.g., logging.DEBUG, TRACE)
        """
        self.logger.setLevel(level)
        for handler in self.logger.handlers:
            if isinstance(handler, logging.FileHandler):
                handler.setLevel(min(level, logging.INFO))

    def enable_parse_trace(self) -> None:
        """Emit the parser's memo evaluations."""
        self.set_level(TRACE)


logger_setup = CtxlangLogger()
logger = logger_setup.logger
