#!/usr/bin/env python3
"""Compare multiplexed-grating and optimized-fanout efficiency scaling.

Superposed gratings split one index budget across M carriers, so each
first order decays like 1/M^2. A jointly optimized volume routing one
beam to M spots only pays the 1/M power split. The printed slopes are
the least-squares fits of log(eta) against log(M).
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ove.experiments import optimized_curve, superposed_curve
from ove.io import write_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/holography", help="output directory")
    ap.add_argument("--superposed-budget", type=float, default=0.005,
                    help="index budget for the grating stack (weak regime)")
    ap.add_argument("--optimized-budget", type=float, default=0.05,
                    help="index budget for the optimized fanout")
    args = ap.parse_args()

    sup = superposed_curve([1, 2, 4, 8], args.superposed_budget)
    print(f"superposed  (budget {args.superposed_budget}): "
          f"slope {sup.fitted_log_slope:+.3f}")
    for m, eta in zip(sup.m_values, sup.eta_per_output):
        print(f"  M={m}: eta {eta:.3e}")

    opt, _runs = optimized_curve([1, 2, 4], args.optimized_budget)
    print(f"optimized   (budget {args.optimized_budget}): "
          f"slope {opt.fitted_log_slope:+.3f}")
    for m, eta in zip(opt.m_values, opt.eta_per_output):
        print(f"  M={m}: eta {eta:.3e}")
    print(f"slope gap {abs(opt.fitted_log_slope - sup.fitted_log_slope):.3f}")

    os.makedirs(args.out, exist_ok=True)
    rows = [("superposed", m, eta) for m, eta in zip(sup.m_values, sup.eta_per_output)]
    rows += [("optimized", m, eta) for m, eta in zip(opt.m_values, opt.eta_per_output)]
    write_csv(os.path.join(args.out, "efficiency.csv"),
              ["scheme", "m", "eta_per_output"], rows)
    write_csv(os.path.join(args.out, "slopes.csv"), ["scheme", "fitted_log_slope"],
              [("superposed", sup.fitted_log_slope),
               ("optimized", opt.fitted_log_slope)])
    print(f"artifacts in {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
