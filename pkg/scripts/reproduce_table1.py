#!/usr/bin/env python3
"""Chequerboard comparison table (permanental K1/K2 vs the kNN baseline).

Writes table1.csv and summary.json to the output directory (default
out/table1) using the pinned experiment seed.
"""

import sys

from permclass.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/table1"
    raise SystemExit(main(["reproduce", "table1", "--out", out]))
