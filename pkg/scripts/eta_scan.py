"""Scan the constrained supremum over a (eta, mu/mu_crit) grid and write a CSV table.

    python scripts/eta_scan.py --p 2 --theta 1 --out scan.csv
"""
import argparse
import csv
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from tmfrac.functional import FunctionalParams, maximize_ad
from tmfrac.measure import MeasureParams, make_grid


def point(args):
    p, theta, eta, frac, n = args
    P = MeasureParams(p, theta)
    rep = maximize_ad(FunctionalParams.from_fraction(frac, eta, P), P,
                      make_grid(P, 10.0, n, "hybrid", r_min=1e-6))
    return {"eta": eta, "mu_frac": frac, "value": rep.value, "converged": rep.converged,
            "concentration": rep.concentration_fraction, "vanishing": rep.vanishing_indicator,
            "lower_bound": rep.value > FunctionalParams.from_fraction(frac, eta, P).mu * (1 + eta)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--out", default="eta_scan.csv")
    a = ap.parse_args()
    pts = [(a.p, a.theta, round(e, 3), round(f, 3), a.n)
           for e in np.linspace(0, 0.9, 10) for f in np.linspace(0.1, 1.0, 10)]
    with ProcessPoolExecutor(a.jobs) as ex:
        rows = list(ex.map(point, pts))
    with open(a.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {a.out}")


if __name__ == "__main__":
    main()
