# Threshold formulas side by side for a few block sizes.
from blocksense.bounds import BOUNDS, BoundQuery, evaluate

n, m = 256, 500
print("k   " + "  ".join(f"{w:>8}" for w in BOUNDS))
for k in (2, 4, 8, 16, 32):
    q = BoundQuery(n, n, k, k, m, 1.0, 0.05)
    print(f"{k:<3} " + "  ".join(f"{evaluate(w, q):8.3f}" for w in BOUNDS))

# passive needs roughly n / sqrt(k m); adaptive needs roughly n / (k^2 sqrt(m))
# until the n-free edge-search term takes over
q = BoundQuery(n, n, 8, 8, m)
print("passive / active upper bounds at k=8:",
      round(evaluate("ploc-ub", q) / evaluate("aloc-ub", q), 2))
