"""Largest x_hat (to a given resolution) that the contraction certifier accepts.

    python scripts/max_certifiable_x.py --degree 2 --lam 0.69 0.685 0.68
    python scripts/max_certifiable_x.py --degree 2:1/2,3:1/2 --lam 0.61 --m 32
"""

import argparse
from fractions import Fraction

from survey_recon.config import parse_value
from survey_recon.core import DegreeDistribution, decimal_string
from survey_recon.potts_certify import ContractionProblem, certify_contraction


def parse_degree(text: str) -> DegreeDistribution:
    if ":" not in text:
        return DegreeDistribution.point(int(text))
    atoms = []
    for part in text.split(","):
        d, p = part.split(":")
        atoms.append((int(d), parse_value(p)))
    return DegreeDistribution(tuple(atoms))


def max_x_hat(q, lam, degree, m, resolution):
    """Bisection over multiples of ``resolution``; certified sets are down-closed in x_hat."""
    base = ContractionProblem(q, lam, degree, 0)
    ok = lambda k: certify_contraction(base.with_x_hat(k * resolution), m).certified
    lo, hi = 0, int(Fraction(q - 1, q) / resolution)
    if ok(hi):
        return hi * resolution
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo * resolution


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, default=3)
    ap.add_argument("--degree", default="2")
    ap.add_argument("--lam", nargs="+", required=True)
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--resolution", default="1/100000")
    args = ap.parse_args()
    degree = parse_degree(args.degree)
    res = parse_value(args.resolution)
    for lam in args.lam:
        x = max_x_hat(args.q, parse_value(lam), degree, args.m, res)
        print(f"lambda={lam} m={args.m} max certified x_hat={decimal_string(x, 6)}")


if __name__ == "__main__":
    main()
