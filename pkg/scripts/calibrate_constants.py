"""Regenerate src/bosepair/data/error_constants.json from the exact Fock oracle.

Usage: python3 scripts/calibrate_constants.py [--check]
--check compares against the stored file and exits nonzero on drift > 1e-8.
"""
import argparse
import json
import sys
from pathlib import Path

from bosepair import checks
from bosepair import error_norms as E

TARGET = Path(__file__).resolve().parents[1] / "src" / "bosepair" / "data" / "error_constants.json"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    ap.add_argument("--drift-tol", type=float, default=1e-8)
    args = ap.parse_args(argv)
    entries = checks.calibrate()
    if args.check:
        stored, _ = E.load_constants(TARGET)
        drift = checks.constants_drift(entries, stored)
        print(f"max drift {drift:.3e}")
        return 0 if drift <= args.drift_tol else 1
    doc = checks.constants_document(entries)
    TARGET.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for e in entries:
        print(f"{e['name']:>14s}  slot {e['slot']}  {e['value']: .15f}  resid {e['residual']:.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
