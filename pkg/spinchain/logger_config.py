import logging
import os

PACKAGE_LOGGER = "spinchain"


def setup_logger(name: str = PACKAGE_LOGGER) -> logging.Logger:
    root = logging.getLogger(PACKAGE_LOGGER)
    if not root.handlers:
        root.setLevel(os.getenv("SPINCHAIN_LOG_LEVEL", "INFO").upper())
        handler = logging.StreamHandler()
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )
        handler.setFormatter(formatter)
        root.addHandler(handler)
    return logging.getLogger(name)
