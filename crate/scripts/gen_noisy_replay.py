#!/usr/bin/env python3
"""Generate the recorded noisy proximity replay used by the hysteresis test.

The robot closes on a wall from 1.2 m to 0.35 m, loiters around the Turn
threshold, then backs away. Range noise is bounded (uniform) so that any
tick-to-tick jump is smaller than the latch band.
"""
import math
import random
import sys

N = 600
DT = 0.1
NOISE = 0.045


def front(i):
    t = i / (N - 1)
    if t < 0.35:
        base = 1.2 - (1.2 - 0.5) * t / 0.35
    elif t < 0.65:
        # Dwell with a slow wobble across the 0.5 m threshold.
        base = 0.5 + 0.03 * math.sin(2 * math.pi * (t - 0.35) / 0.1)
    else:
        base = 0.5 + (1.2 - 0.5) * (t - 0.65) / 0.35
    return base


def main(out):
    rng = random.Random(20240607)
    with open(out, "w") as f:
        f.write("t,front,left,right\n")
        for i in range(N):
            fr = front(i) + rng.uniform(-NOISE, NOISE)
            left = 1.5 + rng.uniform(-NOISE, NOISE)
            right = 1.6 + rng.uniform(-NOISE, NOISE)
            f.write(f"{i * DT:.1f},{fr:.4f},{left:.4f},{right:.4f}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/noisy_front_replay.csv")
