# SPDX-License-Identifier: GPL-2.0-or-later

"""Allow running as python -m magweyl."""

from magweyl import main

main()
