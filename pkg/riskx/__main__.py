"""Permite ejecutar `python -m riskx`."""

import sys

from riskx.cli import main

if __name__ == "__main__":
    sys.exit(main())
