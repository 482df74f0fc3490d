"""Allow running as `python -m fractaldrum`."""
import sys
from fractaldrum.cli import main

if __name__ == "__main__":
    sys.exit(main())
