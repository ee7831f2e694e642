#!/usr/bin/env python3
"""Formats Hudson's Bay lynx-hare pelt counts for `rdem`.

Input: any CSV with a year column and lynx and hare columns in thousands
(header names matched case-insensitively, e.g. `Year,Lynx,Hare`).
Output: `t,y1,y2` with y1 = hare (prey) and y2 = lynx (predator), one row per
year from 1900 to 1920.

    python3 scripts/format_lynx_hare.py raw.csv data/lynx_hare.csv
"""

import argparse
import csv
import sys


def column(header, name):
    for i, h in enumerate(header):
        if h.strip().lower() == name:
            return i
    sys.exit(f"no {name!r} column in header {header}")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("input")
    parser.add_argument("output")
    parser.add_argument("--first", type=int, default=1900)
    parser.add_argument("--last", type=int, default=1920)
    args = parser.parse_args()

    with open(args.input, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    year, lynx, hare = column(header, "year"), column(header, "lynx"), column(header, "hare")
    picked = {}
    for r in body:
        y = int(float(r[year]))
        if args.first <= y <= args.last:
            picked[y] = (float(r[hare]), float(r[lynx]))
    missing = [y for y in range(args.first, args.last + 1) if y not in picked]
    if missing:
        sys.exit(f"missing years: {missing}")

    with open(args.output, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "y1", "y2"])
        for y in range(args.first, args.last + 1):
            w.writerow([y, *picked[y]])
    print(f"wrote {len(picked)} rows to {args.output}")


if __name__ == "__main__":
    main()
