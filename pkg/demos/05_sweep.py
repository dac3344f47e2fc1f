# A small version of the passive phase-transition experiment.
import sys

from blocksense.harness import SweepSpec, emit_csv, emit_svg, run_sweep

spec = SweepSpec(mode="passive", sizes=[(16, 16, 4, 4), (36, 36, 6, 6)],
                 snr_grid=[1, 2, 3, 4, 5], grid_axis="rescaled", m=100, trials=50, seed=1)
res = run_sweep(spec)
for key, rows in res.curves().items():
    print(key, [round(r["phat"], 2) for r in rows])
print("0.95 crossings", res.crossings())

out = sys.argv[1] if len(sys.argv) > 1 else "sweep"
emit_csv(res, out + ".csv")
emit_svg(res, out + ".svg")
print("wrote", out + ".csv", out + ".svg")
