#!/usr/bin/env python3
"""Exact coverage of the 95% Wilson interval for a binomial(n, p) count.

Used to pick the campaign size of the reach-estimator acceptance check: the
chance that at least ``need`` of ``campaigns`` independent intervals cover p.
"""
import argparse

import numpy as np
from scipy.stats import binom

from stochsynth.simulate import wilson_interval


def coverage(n: int, p: float) -> float:
    ks = np.arange(n + 1)
    hit = np.array([lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in ks)])
    return float(binom.pmf(ks, n, p)[hit].sum())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=1 / 8)
    ap.add_argument("--n", type=int, nargs="+", default=[20, 30, 40, 51, 60, 80, 100, 200])
    ap.add_argument("--campaigns", type=int, default=100)
    ap.add_argument("--need", type=int, default=95)
    a = ap.parse_args()
    print(f"{'n':>5}{'coverage':>10}{'P(pass)':>10}")
    for n in a.n:
        c = coverage(n, a.p)
        print(f"{n:>5}{c:>10.4f}{binom.sf(a.need - 1, a.campaigns, c):>10.3f}")


if __name__ == "__main__":
    raise SystemExit(main())
