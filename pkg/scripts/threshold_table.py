"""Green constant, threshold and test-function value across eta (p=2, theta=1)."""
from tmfrac.asymptotics import cc_threshold, critical_test_details, green_grid, h_epsilon_eta, solve_green
from tmfrac.measure import MeasureParams

P = MeasureParams(2, 1)
grid = green_grid(P)
print(" eta     A_eta     threshold  thr(1-eta)  AD(v_eps)  norm-1     H")
for eta in (0.0, 0.05, 0.1, 0.25, 0.5):
    gf = solve_green(eta, P, grid)
    tf = critical_test_details(1e-3, eta, gf)
    h = h_epsilon_eta(1e-3, eta, gf)
    t = cc_threshold(gf)
    print(f"{eta:4.2f}  {gf.a_eta:.6f}  {t:9.4f}  {t * (1 - eta):9.4f}  {tf.value:9.4f}  "
          f"{tf.norm_defect:.2e}  {h.value:.4f}")
