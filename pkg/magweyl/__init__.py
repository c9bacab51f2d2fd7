# SPDX-License-Identifier: GPL-2.0-or-later

"""Numerical toolkit for magnetic Weyl calculus on discretized phase space."""

import sys

try:
    from magweyl._version import __version__
except ImportError:
    __version__ = "0.0.0.dev0"


def main() -> None:
    """Run the batch front-end and exit with its status code."""
    from magweyl.cli import run_cli

    sys.stdout.flush()
    sys.exit(run_cli(sys.argv[1:]))
