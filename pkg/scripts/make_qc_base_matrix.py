#!/usr/bin/env python3
"""Generate the pinned rate-5/6 quasi-cyclic parity-check base matrix.

Layout: 4 block rows x 24 block columns with lifting size 22, giving a
(88, 528) binary matrix and 440 information bits. The last four block
columns form a staircase (block-bidiagonal identity) parity section for
linear-time encoding; the 20 information columns have weight 3 each. Shifts
are searched (seeded) so the lifted graph has no 4-cycles.

The output is written to src/gnndsim/codec/data/qc_base_rate56.txt and is
checked into the repository; this script records how it was produced.
"""

import sys
from pathlib import Path

import numpy as np

Z = 22
ROWS = 4
INFO_COLS = 20
PAR_COLS = 4


def build_template():
    """-2 marks an absent block, -1 a to-be-chosen info shift, >=0 fixed."""
    base = np.full((ROWS, INFO_COLS + PAR_COLS), -2, dtype=int)
    for c in range(INFO_COLS):
        missing = c % ROWS
        for r in range(ROWS):
            if r != missing:
                base[r, c] = -1
    for i in range(PAR_COLS):
        base[i, INFO_COLS + i] = 0
        if i + 1 < ROWS:
            base[i + 1, INFO_COLS + i] = 0
    return base


def count_four_cycles(base):
    bad = 0
    for r1 in range(ROWS):
        for r2 in range(r1 + 1, ROWS):
            diffs = []
            for c in range(base.shape[1]):
                if base[r1, c] >= 0 and base[r2, c] >= 0:
                    diffs.append((base[r1, c] - base[r2, c]) % Z)
            bad += len(diffs) - len(set(diffs))
    return bad


def search(seed=7, restarts=200):
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        base = build_template()
        used = {}
        for r1 in range(ROWS):
            for r2 in range(r1 + 1, ROWS):
                used[(r1, r2)] = set()
        for i in range(PAR_COLS):  # staircase blocks contribute difference 0
            if i + 1 < ROWS:
                used[(i, i + 1)].add(0)
        ok = True
        for c in range(INFO_COLS):
            rows = [r for r in range(ROWS) if base[r, c] == -1]
            for _ in range(2000):
                shifts = rng.integers(0, Z, size=len(rows))
                pairs = [((rows[a], rows[b]), (shifts[a] - shifts[b]) % Z)
                         for a in range(len(rows)) for b in range(a + 1, len(rows))]
                if all(d not in used[p] for p, d in pairs):
                    for p, d in pairs:
                        used[p].add(d)
                    for r, s in zip(rows, shifts):
                        base[r, c] = int(s)
                    break
            else:
                ok = False
                break
        if ok:
            assert count_four_cycles(base) == 0
            return base
    raise RuntimeError("no 4-cycle-free assignment found")


def main():
    base = search()
    base = np.where(base == -2, -1, base)  # file convention: -1 = zero block
    out = Path(__file__).resolve().parents[1] / "src/gnndsim/codec/data/qc_base_rate56.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("# quasi-cyclic parity-check base matrix, rate 5/6\n")
        fh.write("# line 1: block_rows block_cols lifting_size\n")
        fh.write("# then block_rows lines of block_cols integers;\n")
        fh.write("# -1 = all-zero block, s >= 0 = circulant with H[z, (z+s) mod Z] = 1\n")
        fh.write(f"{ROWS} {INFO_COLS + PAR_COLS} {Z}\n")
        for r in range(ROWS):
            fh.write(" ".join(f"{v:3d}" for v in base[r]) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    sys.exit(main())
