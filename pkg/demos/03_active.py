# Adaptive localization: coarse search over shifted tilings, then
# column and row edge searches.
from blocksense import RngHandle, sample_instance
from blocksense.active import build_collections, cbs_allocation, localize_active
from blocksense.bounds import BoundQuery, active_loc_ub

n, k, m = 64, 4, 500
colls = build_collections(n, n, k, k)
for label, c in colls.items():
    print(label, "tiles", len(c), "first", c.blocks[0].as_tuple(), "last wraps", c.blocks[-1].wrap)

# measurements per level of the compressive binary search
print("allocation", cbs_allocation(m, 6))

q = BoundQuery(n, n, k, k, m, 1.0, 0.1)
mu = active_loc_ub(q)
print("amplitude from the explicit-constant bound:", round(mu, 3))

inst = sample_instance(n, n, k, k, mu=0.8, sigma=1.0, rng=RngHandle(7).generator())
res = localize_active(inst, 22 * m, 0.1 / 8, RngHandle(8), record=True)
print("true", inst.b_star.as_tuple(), "estimate", res.block.as_tuple())
print("region", res.region.height, "x", res.region.width, "contains B*:",
      res.region.contains_block(inst.b_star))
print("spent per phase", res.spent, "of", 22 * m)
print("first measurements:")
for rec in res.transcript[:3]:
    print("  ", rec.phase_tag, round(rec.y, 3), rec.x.describe()["kind"])
