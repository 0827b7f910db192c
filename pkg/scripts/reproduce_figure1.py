#!/usr/bin/env python3
"""Ratio accuracy study: curves, gap statistics, probability curves.

Writes ratio_curves.csv, probability_curves.csv, and summary.json to the
output directory (default out/figure1) using the pinned study seed.
"""

import sys

from permclass.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/figure1"
    raise SystemExit(main(["reproduce", "figure1", "--out", out]))
