#!/usr/bin/env python3
"""Writes data/synthetic_weekly_arrivals.csv: one week of 20-minute buckets.

Expected arrivals average about 2000 per bucket (6000 per hour) with a daily
cycle peaking mid-afternoon, quieter weekends and mild multiplicative noise.
The output is fully determined by SEED.
"""

import argparse
import math
import random

SEED = 20140101
BUCKET_SECONDS = 1200
BUCKETS_PER_DAY = 72
DAYS = 7
MEAN_PER_BUCKET = 2000.0
DAY_LEVEL = [1.05, 1.08, 1.06, 1.04, 1.00, 0.90, 0.87]


def rates():
    rng = random.Random(SEED)
    raw = []
    for day in range(DAYS):
        for k in range(BUCKETS_PER_DAY):
            hour = k / 3.0
            daily = 1.0 + 0.35 * math.cos(2.0 * math.pi * (hour - 15.0) / 24.0)
            noise = 1.0 + 0.05 * (2.0 * rng.random() - 1.0)
            raw.append(DAY_LEVEL[day] * daily * noise)
    scale = MEAN_PER_BUCKET * len(raw) / sum(raw)
    return [round(r * scale, 1) for r in raw]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/synthetic_weekly_arrivals.csv")
    args = parser.parse_args()
    with open(args.out, "w", newline="\n") as f:
        f.write("t_seconds,count\n")
        for i, r in enumerate(rates()):
            f.write(f"{i * BUCKET_SECONDS},{r}\n")


if __name__ == "__main__":
    main()
