#!/usr/bin/env python3
"""Run every shipped acceptance config and print one PASS/FAIL line per criterion.

Usage: python3 scripts/run_acceptance.py [--out runs/acceptance]
"""

import argparse
import json
import sys
import time
from pathlib import Path

from sconclab.cli import execute

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "runs" / "acceptance"))
    args = ap.parse_args()
    ok = True
    for i, cfg in enumerate(sorted((ROOT / "configs").glob("c*.toml")), start=1):
        out = Path(args.out) / cfg.stem
        start = time.perf_counter()
        code = execute(str(cfg), out=str(out), quiet=True)
        elapsed = time.perf_counter() - start
        passed = code == 0
        if (out / "report.json").exists():
            passed &= json.loads((out / "report.json").read_text())["pass"]
        ok &= passed
        print(f"criterion {i:>2} ({cfg.stem}): {'PASS' if passed else 'FAIL'} [{elapsed:.1f} s] -> {out}", flush=True)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
