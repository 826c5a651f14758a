"""Moser-family certificate against its ball limit for growing n."""
from tmfrac.asymptotics import sharpness_certificate
from tmfrac.measure import MeasureParams

for p, theta in ((2, 1), (3, 2)):
    P = MeasureParams(p, theta)
    print(f"p={p} theta={theta}")
    print("    n   rho=1    rho=2    doubling/2^(theta+1)")
    for n in (20, 60, 200, 1000):
        c1, c2 = (sharpness_certificate(n, rho, P) for rho in (1.0, 2.0))
        ball = P.omega_theta / (theta + 1)
        print(f"{n:5d}  {c1 / ball:.4f}  {c2 / (ball * 2 ** (theta + 1)):.4f}   {c2 / c1 / 2 ** (theta + 1):.4f}")
