"""Compare level-0 differencing with pyramid majority fusion on random scenes.

Each scene is a flat background with one square block of real change plus a
number of isolated single-pixel flips. Reports false and true positives per
method and how often fusion wins, ties, or loses. The constructed 16x16
acceptance instance is printed first.
"""

import argparse

import numpy as np

from terrascope.change import multiscale_fuse
from terrascope.raster import RasterGrid


def scene(size, block, flips, amplitude, rng):
    a = rng.normal(0, 1, (size, size))
    b = a + rng.normal(0, 1, (size, size))
    truth = np.zeros((size, size), bool)
    r, c = rng.integers(0, size - block + 1, size=2)
    truth[r : r + block, c : c + block] = True
    b[truth] += amplitude
    for _ in range(flips):
        fr, fc = rng.integers(0, size, size=2)
        if not truth[fr, fc]:
            b[fr, fc] += amplitude
    return a, b, truth


def score(mask, truth):
    mask = mask.astype(bool)
    return int((mask & ~truth).sum()), int((mask & truth).sum())


def constructed():
    a = np.zeros((16, 16))
    b = a.copy()
    b[4:8, 4:8] = 50.0
    for r, c in [(1, 2), (0, 15), (15, 0), (12, 13)]:
        b[r, c] = 50.0
    truth = np.zeros((16, 16), bool)
    truth[4:8, 4:8] = True
    return a, b, truth


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--block", type=int, default=12)
    ap.add_argument("--flips", type=int, default=20)
    ap.add_argument("--amplitude", type=float, default=8.0)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--k-sigma", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    a, b, truth = constructed()
    res = multiscale_fuse(RasterGrid(a), RasterGrid(b), 3, 2.0)
    for lv, m in enumerate(res.level_masks):
        print(f"constructed level {lv}: FP/TP = {score(m, truth)}")
    print(f"constructed fused:   FP/TP = {score(res.mask, truth)}")

    rng = np.random.default_rng(args.seed)
    wins = ties = losses = 0
    totals = np.zeros(4, dtype=np.int64)
    for _ in range(args.trials):
        a, b, truth = scene(args.size, args.block, args.flips, args.amplitude, rng)
        res = multiscale_fuse(RasterGrid(a), RasterGrid(b), args.levels, args.k_sigma)
        fp0, tp0 = score(res.level_masks[0], truth)
        fp, tp = score(res.mask, truth)
        totals += (fp0, tp0, fp, tp)
        if fp < fp0 and tp >= tp0:
            wins += 1
        elif fp == fp0 and tp == tp0:
            ties += 1
        else:
            losses += 1
    n = args.trials
    print(f"random scenes: {n} trials, fusion strictly better {wins}, identical {ties}, otherwise {losses}")
    print(f"mean level-0 FP {totals[0] / n:.2f} TP {totals[1] / n:.2f}; fused FP {totals[2] / n:.2f} TP {totals[3] / n:.2f}")


if __name__ == "__main__":
    main()
