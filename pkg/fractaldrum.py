#!/usr/bin/env python3
"""
fractaldrum.py — Fractal Drum CLI entry point (thin wrapper).

Usage:
    python fractaldrum.py snowflake --level 4 -k 20          # Classic snowflake spectrum
    python fractaldrum.py snowflake --preset a=0.4 --bc neumann
    python fractaldrum.py julia --c -1+0i --iterations 20     # Basilica spectrum
    python fractaldrum.py julia --c 0.2 --area-only           # Pixel area only
    python fractaldrum.py boxdim --level 6                    # Box-counting dimension
    python -m fractaldrum ...                                 # Module invocation
    fractaldrum ...                                           # After pip install
"""

import sys
from fractaldrum.cli import main

if __name__ == "__main__":
    sys.exit(main())
