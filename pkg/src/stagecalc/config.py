# Configuration for sessions, diff campaigns and logging

import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

LOGS_DIR = Path(__file__).resolve().parent.parent.parent / "debugging" / "logs"

# Logging Configuration
logging_config = {
    "level": "INFO",
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "log_to_file": False,
}

# Toplevel Session Configuration
session_config = {
    "pipeline": "optimized",  # or "baseline"
    "prompt": "# ",
    "continuation_prompt": "  ",
    "recursion_limit": 20000,  # elaboration and evaluation recurse per node
}

# Differential Testing Configuration
diff_config = {
    "count": 1000,
    "size": 8,
    "seed": 42,
    "max_depth": 3,
    "workers": 1,
    "nesting_bias": 0.3,
    "csp_bias": 0.3,
}


def create_logger(
    kind: str, session_id: str, log_to_file: Optional[bool] = None
) -> logging.Logger:
    """
    Create a named logger for one session or campaign.

    Args:
        kind: Component name, e.g. "Session" or "DiffCampaign"
        session_id: Identifier of the session
        log_to_file: Attach a file handler under debugging/logs; defaults to
            ``logging_config["log_to_file"]``

    Returns:
        logging.Logger: Logger named ``<kind>_<session_id>_<timestamp>``
    """
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    logger_name = f"{kind}_{session_id}_{timestamp}"
    logger = logging.getLogger(logger_name)
    logger.setLevel(getattr(logging, logging_config["level"]))

    if log_to_file is None:
        log_to_file = logging_config["log_to_file"]

    if log_to_file and not logger.handlers:
        LOGS_DIR.mkdir(parents=True, exist_ok=True)
        log_filepath = LOGS_DIR / f"{logger_name}.log"

        file_handler = logging.FileHandler(log_filepath)
        file_handler.setFormatter(logging.Formatter(logging_config["format"]))
        logger.addHandler(file_handler)
        logger.setLevel(logging.DEBUG)

        logger.info(f"{kind} logger initialized for session '{session_id}'")
    elif not logger.handlers:
        # keeps records off stderr; they still propagate to configured parents
        logger.addHandler(logging.NullHandler())

    return logger
