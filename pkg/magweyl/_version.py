# SPDX-License-Identifier: GPL-2.0-or-later

"""Package version. Overwritten at release time."""

__version__ = "0.0.0.dev0"
