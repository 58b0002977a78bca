"""
Logging setup for the command-line entry point.

Library modules only create ``logging.getLogger(__name__)`` loggers;
handlers are installed here, once, by the CLI.
"""

from __future__ import annotations

import logging

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: int | str = logging.INFO) -> None:
    """
    Install a single stream handler on the ``dhvae`` logger.

    Parameters
    ----------
    level : int or str, optional
        Logging level, e.g. ``logging.DEBUG`` or ``'INFO'``.
        Default is ``logging.INFO``.
    """
    root = logging.getLogger('dhvae')
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.propagate = False
