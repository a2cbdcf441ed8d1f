"""Configuration for stipulac."""

import os

from dotenv import load_dotenv

load_dotenv()

ENCODING = "utf-8"

TARGET_SUFFIX = ".java"

PROVER_COMMAND = os.getenv("STIPULAC_PROVER") or None
PROVER_TIMEOUT = float(os.getenv("STIPULAC_PROVER_TIMEOUT", "300"))
INT_SEMANTICS = os.getenv("STIPULAC_INT_SEMANTICS", "math").lower()

LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING").upper()
LOG_FILE = os.getenv("STIPULAC_LOG_FILE") or None

_HANDLERS = ["console", "file_handler"] if LOG_FILE else ["console"]

LOGGING_CONFIG: dict[str, object] = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "detailed": {
            "format": "{asctime} {levelname:<8} [{name}]: {message}",
            "datefmt": "%Y-%m-%d %H:%M:%S",
            "style": "{",
        },
        "simple": {
            "format": "[{levelname:<8}] {name}: {message}",
            "style": "{",
        },
        "bare": {
            "format": "{message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
            "stream": "ext://sys.stderr",
            "level": LOG_LEVEL,
        },
        "diagnostics": {
            "class": "logging.StreamHandler",
            "formatter": "bare",
            "stream": "ext://sys.stderr",
            "level": "INFO",
        },
        **(
            {
                "file_handler": {
                    "class": "logging.FileHandler",
                    "encoding": ENCODING,
                    "formatter": "detailed",
                    "mode": "a",
                    "filename": LOG_FILE,
                    "level": "DEBUG",
                },
            }
            if LOG_FILE
            else {}
        ),
    },
    "root": {
        "handlers": _HANDLERS,
        "level": LOG_LEVEL,
    },
    "loggers": {
        "diagnostics": {
            "handlers": ["diagnostics", *_HANDLERS[1:]],
            "level": "INFO",
            "propagate": False,
        },
        "core": {
            "handlers": _HANDLERS,
            "level": ("INFO", "DEBUG")[LOG_LEVEL == "DEBUG"],
            "propagate": False,
        },
    },
}
