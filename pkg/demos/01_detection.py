# Is there a block at all? The all-ones sum test.
import math

import numpy as np

from blocksense import BoundQuery, RngHandle, SignalInstance, Block
from blocksense.bounds import detection_lb, detection_ub
from blocksense.detect import DetectionParams, estimate_detection_risk, run_detection

n, k, m, alpha = 64, 8, 100, 0.05

# one measurement design, repeated m times: every entry equals 1/n
inst = SignalInstance(n, n, k, k, mu=0.6, sigma=1.0, b_star=Block(20, 33, k, k))
out = run_detection(inst, m, alpha, np.random.default_rng(0))
print("statistic", round(out.statistic, 3), "threshold", round(out.threshold, 3),
      "reject H0:", out.reject)

# the threshold amplitude where the test provably has risk <= alpha,
# and the level below which no test can do that well
q = BoundQuery(n, n, k, k, m, 1.0, alpha)
print("sufficient mu", round(detection_ub(q), 4), " necessary mu", round(detection_lb(q), 4))

# empirical type I / type II errors on a small grid around it
params = DetectionParams(n, n, k, k, 1.0, m, alpha)
grid = [0.0, 0.25, 0.5, detection_ub(q)]
for row in estimate_detection_risk(params, grid, 500, RngHandle(1)):
    print(f"mu={row['mu']:.3f}  type I={row['type_I']:.3f}  type II={row['type_II']:.3f}"
          f"  risk={row['risk']:.3f} +- {row['stderr']:.3f}")

# the statistic's mean grows like m mu k^2 / n while its spread is sqrt(m)
print("signal / noise at the bound:",
      round(m * detection_ub(q) * k * k / n / math.sqrt(m), 3))
