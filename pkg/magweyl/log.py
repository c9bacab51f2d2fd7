# SPDX-License-Identifier: GPL-2.0-or-later

import logging

LOG_FORMAT = '%(asctime)-15s %(name)s: %(levelname)s - %(message)s'
PACKAGE_LOGGER = 'magweyl'

# index is the value of the '--debug' option
DEBUG_LEVELS = (logging.CRITICAL, logging.ERROR, logging.WARNING, logging.INFO, logging.DEBUG)

_installed = []


def debug_level(verbosity):
    """Maps '--debug 0..4' to a logging level."""
    verbosity = max(0, min(int(verbosity), len(DEBUG_LEVELS) - 1))
    return DEBUG_LEVELS[verbosity]


def logger_init(verbosity, *handlers):
    """Attaches ``handlers`` to the package logger.

    Handlers from an earlier call are detached first, so repeated runs in
    one process do not duplicate records.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    while _installed:
        old = _installed.pop()
        logger.removeHandler(old)
        old.close()
    level = debug_level(verbosity)
    logger.setLevel(level)
    formatter = logging.Formatter(LOG_FORMAT)
    for handler in handlers:
        if handler is None:
            continue
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        _installed.append(handler)
    logger.propagate = False
    return logger
