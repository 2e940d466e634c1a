"""Closed-form BSC quantities and the numerically optimized coefficients side by side."""

import argparse
import math

import numpy as np

from covertcast.channels import make_bsc_broadcast
from covertcast.infotheory import analyze_channel, bsc_closed_forms, optimize_gamma


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pW", type=float, default=0.11)
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--bits", action="store_true")
    args = ap.parse_args()

    unit = math.sqrt(math.log(2)) if args.bits else 1.0
    print(f"pW = {args.pW}   ({'bits' if args.bits else 'nats'})")
    print(f"{'pB':>6} {'D_bob':>9} {'D_willie':>9} {'upper':>9} {'lower':>9} {'ub(opt)':>9} {'feasible':>8}")
    for pB in np.linspace(0.01, 0.45, args.points):
        f = bsc_closed_forms(float(pB), args.pW)
        co = optimize_gamma(analyze_channel(make_bsc_broadcast(float(pB), args.pW)))
        print(f"{pB:6.3f} {f['d_bob']:9.4f} {f['d_willie']:9.4f} {f['upper_coefficient'] / unit:9.4f} "
              f"{f['lower_coefficient'] / unit:9.4f} {co.achievable_ub / unit:9.4f} {str(co.feasible):>8}")


if __name__ == "__main__":
    main()
