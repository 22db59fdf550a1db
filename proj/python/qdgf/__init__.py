"""Gaussian random fields conditioned on a large quadratic form."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401


def run(*args):
    """Run a CLI experiment, e.g. ``run("tail", "--eigs", "1", "--u", "2")``."""
    return run_cli([str(a) for a in args])  # noqa: F405
