"""
Logging Setup
=============
루트 로거 설정 (텍스트 또는 JSON 라인)

Logs always go to stderr; stdout is reserved for CLI payloads.
"""

import logging
import sys

from pythonjsonlogger import jsonlogger

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = "INFO", json_logs: bool = False) -> None:
    """
    Configure the root logger once.

    Args:
        level: logging level name
        json_logs: emit JSON lines through python-json-logger
    """
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
