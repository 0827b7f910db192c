#!/usr/bin/env python3
"""Microarray pipeline: mean test errors versus number of selected genes.

Runs on the bundled synthetic generator by default; pass --expr/--labels
to run on a real expression matrix (e.g. the leukemia data exported as
genes-as-rows CSV plus a sample,label sidecar).

    python scripts/reproduce_microarray.py [OUTDIR] [--expr F --labels F]
"""

import sys

from permclass.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:]
    out = argv.pop(0) if argv and not argv[0].startswith("-") else "out/microarray"
    raise SystemExit(main(["reproduce", "microarray", "--out", out] + argv))
