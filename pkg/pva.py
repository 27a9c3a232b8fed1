#!/usr/bin/env python3
"""
Command-line entry point.
Run: python pva.py select --input data.csv --q 10 --method copula
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
