"""How the truncated-domain maximum approaches mu(1+eta) in the vanishing regime.

Prints the value for r_out in {10, 20, 40} and the ratio of successive gaps
to the limit; a ratio near 4 means the deficit decays like r_out^-2.
"""
from tmfrac.functional import FunctionalParams, maximize_ad
from tmfrac.measure import MeasureParams, make_grid

P = MeasureParams(2, 1)
for eta in (0.0, 0.5, 0.9):
    fp = FunctionalParams.from_fraction(0.5, eta, P)
    vals = [maximize_ad(fp, P, make_grid(P, R, 1024 * R // 20 if R > 20 else 1024, "hybrid",
                                         r_min=1e-6)).value for R in (10, 20, 40)]
    lim = fp.mu * (1 + eta)
    gaps = [lim - v for v in vals]
    print(f"eta={eta:.1f}  values={[round(v, 4) for v in vals]}  limit={lim:.4f}  "
          f"gap ratios={gaps[0] / gaps[1]:.2f}, {gaps[1] / gaps[2]:.2f}")
