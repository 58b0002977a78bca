"""
Shared fixtures.
"""

import logging

import matplotlib
matplotlib.use('Agg')  # Use non-interactive backend for testing

import pytest


@pytest.fixture(autouse=True)
def _reset_package_logger():
    """Undo handlers installed by CLI runs so ``caplog`` keeps working."""
    yield
    logger = logging.getLogger('dhvae')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True
