# Passive localization: random Gaussian designs, then exhaustive least squares.
import numpy as np

from blocksense import RngHandle, sample_instance
from blocksense.passive import block_sums, localize_passive, passive_snr_threshold_empirical

n, k, m = 32, 4, 100
g = np.random.default_rng(3)
inst = sample_instance(n, n, k, k, mu=5.0, sigma=1.0, rng=g)
print("true block", inst.b_star.as_tuple())

est, table = localize_passive(inst, m, RngHandle(3))
print("estimate  ", est.as_tuple(), "match:", est == inst.b_star)

# f(B) is the residual of a one-parameter fit; the winner has the smallest one
f = table.f()
print("residual grid", f.shape, "best", round(f.min(), 2), "median", round(np.median(f), 2))
print("slope at the estimate", round(float(table.mu_hat()[est.row_start - 1, est.col_start - 1]), 3))

# block sums of a single design come from a 2D prefix sum
x = g.standard_normal((n, n)) / n
z = block_sums(x, k, k)
print("block sums", z.shape, "example", round(float(z[0, 0]), 4), round(float(x[:k, :k].sum()), 4))

# success rate along the rescaled axis sqrt(k m) snr / n
grid = np.linspace(0.4, 3.6, 9)
for row in passive_snr_threshold_empirical(16, 4, m, 100, RngHandle(4), snr_grid=grid):
    print(f"snr={row['snr']:.2f}  rescaled={row['snr_rescaled']:.2f}  p={row['phat']:.2f}")
