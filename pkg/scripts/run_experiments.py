#!/usr/bin/env python3
"""Standard experiment suite: exponent sweeps, averaging study, oracle comparison.

Writes one directory per experiment under ``results/`` (or ``--out``).
"""

import argparse
import sys
from pathlib import Path

from carnotfill.cli import main

SUITE = [
    ("h3_sphere", ["sweep", "--group", "H3", "--family", "sphere", "--sizes", "2..32", "--oracle"]),
    ("h3_commutator", ["sweep", "--group", "H3", "--family", "commutator", "--sizes", "4..64"]),
    ("h3_sphere_shifted", ["sweep", "--group", "H3", "--family", "sphere-shifted", "--sizes", "2..32"]),
    ("h3_commutator_shifted", ["sweep", "--group", "H3", "--family", "commutator-shifted", "--sizes", "4..64"]),
    ("h3_sphere_fixed_offset", ["sweep", "--group", "H3", "--family", "sphere-shifted", "--sizes", "2..32", "--offset-policy", "fixed"]),
    ("h5_sphere", ["sweep", "--group", "H5", "--family", "sphere", "--sizes", "1..8", "--oracle"]),
    ("h3_avg_sphere", ["avg", "--group", "H3", "--family", "sphere", "--sizes", "4..32"]),
    ("h3_avg_commutator", ["avg", "--group", "H3", "--family", "commutator", "--sizes", "4..64"]),
    ("h5_avg_random", ["avg", "--group", "H5", "--family", "random", "--sizes", "2..16"]),
    ("h3_oracle_commutator", ["oracle", "--group", "H3", "--family", "commutator", "--sizes", "1,2,4"]),
    ("h3_oracle_sphere", ["oracle", "--group", "H3", "--family", "sphere", "--sizes", "2..16"]),
]


def run_suite(out: Path, only: list[str] | None) -> int:
    failed = []
    for name, argv in SUITE:
        if only and name not in only:
            continue
        print(f"== {name}", file=sys.stderr)
        if main(argv + ["--out", str(out / name)]) != 0:
            failed.append(name)
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("only", nargs="*", help=f"subset of: {', '.join(n for n, _ in SUITE)}")
    ns = ap.parse_args()
    sys.exit(run_suite(Path(ns.out), ns.only))
