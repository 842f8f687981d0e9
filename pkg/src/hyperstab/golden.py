"""Frozen reference values produced by ``scripts/calibrate_residuals.py``."""

# Tail-window [8, 10] residual sups of the third-order example, as
# 1.05 x the values of a reference run with h = 5e-4 over [0, 20], rounded up.
THIRD_ORDER_TAIL_TOL = (0.1116, 0.5604, 2.912)

# Tail-window [6, 8] sup of |x2 + d1| for the continuous-time third-order loop
# (gains 1, 2, 4, m = 4, d1 = 0.5 sin t), 1.05 x a run with h_max = 5e-4 to t = 16,
# rounded up.
CT_TAIL_X2_TOL = 0.0815
