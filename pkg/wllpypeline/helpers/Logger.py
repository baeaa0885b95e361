import logging
import warnings
from typing import Union

PACKAGE_LOGGER_NAME = "wllpypeline"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _resolve_loglevel(loglevel: Union[int, str]) -> int:
    try:
        return getattr(logging, loglevel.upper())
    except AttributeError:
        try:
            return int(loglevel)
        except ValueError:
            warnings.warn(f"Did not recognize loglevel={loglevel}, setting loglevel to DEBUG", RuntimeWarning)
            return logging.DEBUG


def get_logger(name: str = None, loglevel: Union[int, str] = logging.DEBUG) -> logging.Logger:
    """

    Parameters
    ----------
    name
        name of the logger, if none the package logger is returned. Names are placed below the package logger,
        e.g. ``LocalLinearization`` becomes ``wllpypeline.LocalLinearization``
    loglevel
        loglevel of the logger, either an int or the str level names of the logging module

    Returns
    -------
    logging.Logger
        A logger with respective level and formatted output

    """
    if name is None or name == PACKAGE_LOGGER_NAME:
        full_name = PACKAGE_LOGGER_NAME
    elif name.startswith(PACKAGE_LOGGER_NAME + "."):
        full_name = name
    else:
        full_name = f"{PACKAGE_LOGGER_NAME}.{name}"
    logger = logging.getLogger(full_name)
    level = _resolve_loglevel(loglevel)

    if not logger.handlers:
        ch = logging.StreamHandler()
        ch.setLevel(level)
        ch.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(ch)
        # records are printed once, by the handler of the named logger
        logger.propagate = False
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)
    return logger


def set_package_loglevel(loglevel: Union[int, str]) -> int:
    """
    Sets the level of every logger that was created through :func:`get_logger`.

    Parameters
    ----------
    loglevel
        loglevel as int or level name

    Returns
    -------
    int
        the resolved numeric level

    """
    level = _resolve_loglevel(loglevel)
    prefix = PACKAGE_LOGGER_NAME + "."
    for name, logger in list(logging.root.manager.loggerDict.items()):
        if isinstance(logger, logging.Logger) and (name == PACKAGE_LOGGER_NAME or name.startswith(prefix)):
            logger.setLevel(level)
            for handler in logger.handlers:
                handler.setLevel(level)
    return level
