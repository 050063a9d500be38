"Centralized logging configuration."

import logging
import os
import sys

import numpy as np
import structlog


def numpy_value_adder(logger, log_method, event_dict):
    """Make numpy values in the event JSON-serializable.

    Scalars become Python numbers; small arrays become lists and large ones
    are summarized by shape and sup-norm.

    Must be added to processor list *before* JSONRenderer, otherwise event_dict
    will be rendered to string already.
    """
    for key, value in event_dict.items():
        match value:
            case np.generic():
                event_dict[key] = value.item()
            case np.ndarray() if value.size <= 16:
                event_dict[key] = value.tolist()
            case np.ndarray():
                event_dict[key] = {
                    "shape": list(value.shape),
                    "sup_norm": float(np.max(np.abs(value))),
                }
    return event_dict


def _log_level() -> int:
    name = os.getenv("MIDE_LAB_LOG_LEVEL", "INFO").upper()
    return logging.getLevelNamesMapping().get(name, logging.INFO)


structlog.configure(
    processors=[
        structlog.contextvars.merge_contextvars,
        structlog.processors.TimeStamper(fmt="iso"),
        numpy_value_adder,
        structlog.processors.JSONRenderer(),
    ],
    wrapper_class=structlog.make_filtering_bound_logger(_log_level()),
    logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
)

log = structlog.get_logger()
