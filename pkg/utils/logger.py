from datetime import datetime
from pathlib import Path
from typing import Optional, TextIO, Union
import logging
import os
import sys
import time

LOG_DIR_ENV = "DMSVC_LOG_DIR"


class Formatter(logging.Formatter):
    def formatTime(self, record, datefmt=None):
        stamp = time.strftime("%Y-%m-%d %H:%M:%S", time.localtime(record.created))
        return f"{stamp}.{int(record.msecs):03d}"


class Logger(logging.Logger):
    FORMAT = "[%(asctime)s] [%(levelname)s] [%(threadName)s] [%(filename)s:%(funcName)s:%(lineno)s] %(message)s"

    def __init__(self, name: str, level: int = logging.INFO, stream: TextIO = sys.stderr):
        """
        Simulator logger with a console handler on stderr.

        Parameters:
        - name: str, the name of the logger
        - level: int, the logging level (default is logging.INFO)
        - stream: console stream; stdout is left to CSV and hex payloads
        """
        super().__init__(name, level)
        self.formatter = Formatter(self.FORMAT)
        console_handler = logging.StreamHandler(stream)
        console_handler.setFormatter(self.formatter)
        console_handler.setLevel(level)
        self.addHandler(console_handler)
        self.propagate = False

    def add_file(self, path: Union[str, Path]) -> Path:
        """Also write records to ``path``, creating its directory."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path)
        file_handler.setFormatter(self.formatter)
        file_handler.setLevel(self.level)
        self.addHandler(file_handler)
        return path

    def set_verbosity(self, level: int) -> None:
        self.setLevel(level)
        for handler in self.handlers:
            handler.setLevel(level)


def daily_log_path(directory: Union[str, Path]) -> Path:
    return Path(directory) / f"dmsvc_{datetime.now().strftime('%Y-%m-%d')}.log"


logger = Logger("dmsvc")
_log_dir: Optional[str] = os.environ.get(LOG_DIR_ENV)
if _log_dir:
    logger.add_file(daily_log_path(_log_dir))
