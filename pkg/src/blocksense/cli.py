"""Command line entry point ``blocksense``.

Exit codes: 0 success, 2 parameter error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
import warnings

from . import bounds
from .active import active_trial
from .core import ParameterError, RngHandle
from .detect import DetectionParams, estimate_detection_risk
from .harness import emit_csv, emit_svg, load_config, run_sweep, spec_from_mapping
from .passive import passive_trial

EXIT_PARAM = 2
EXIT_IO = 3


def _dims(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")


def _fill(args) -> None:
    args.n2 = args.n2 or args.n1
    args.k2 = args.k2 or args.k1


def _write_rows(path: str, header, rows) -> None:
    fh = sys.stdout if path == "-" else open(path, "w", encoding="utf-8", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_detect(args) -> None:
    _fill(args)
    params = DetectionParams(args.n1, args.n2, args.k1, args.k2, args.sigma, args.m, args.alpha)
    mus = [float(v) for v in args.mu.split(",")]
    rows = estimate_detection_risk(params, mus, args.trials, RngHandle(args.seed))
    cols = ("mu", "type_I", "type_II", "risk", "trials", "stderr")
    _write_rows(args.out, cols, [[r[c] for c in cols] for r in rows])


def cmd_localize_passive(args) -> None:
    _fill(args)
    rows = []
    for t in range(args.trials):
        r = passive_trial(args.n1, args.n2, args.k1, args.k2, args.mu, args.sigma, args.m,
                          RngHandle(args.seed, (t,)))
        rows.append([t, int(r["success"]), r["est"].row_start, r["est"].col_start,
                     r["true"].row_start, r["true"].col_start, r["f_star"], r["f_best"]])
    _write_rows(args.out, ("trial", "success", "est_row", "est_col", "true_row", "true_col",
                           "f_star", "f_best"), rows)


def cmd_localize_active(args) -> None:
    _fill(args)
    rows = []
    for t in range(args.trials):
        r = active_trial(args.n1, args.n2, args.k1, args.k2, args.mu, args.sigma, args.budget,
                         args.delta, RngHandle(args.seed, (t,)), args.variant)
        sp = r["spent"]
        rows.append([t, int(r["success"]), r["est"].row_start, r["est"].col_start,
                     r["spent_total"], sp.get("cbs", 0), sp.get("stage1", 0),
                     sp.get("search", 0)])
    _write_rows(args.out, ("trial", "success", "est_row", "est_col", "spent_total",
                           "spent_cbs", "spent_stage1", "spent_search"), rows)


def parse_bound_grid(text: str) -> list[dict]:
    """``"n1=64 n2=64 k1=2,4 k2=2,4 m=100 sigma=1 alpha=0.05"``; ``n``/``k`` set both axes."""
    axes: dict[str, list[float]] = {}
    for tok in text.replace(";", " ").split():
        if "=" not in tok:
            raise ParameterError(f"bad grid token {tok!r}")
        key, vals = tok.split("=", 1)
        try:
            values = [float(v) for v in vals.split(",") if v]
        except ValueError:
            raise ParameterError(f"bad grid values in {tok!r}") from None
        if key == "n":
            axes["n1"] = axes["n2"] = values
        elif key == "k":
            axes["k1"] = axes["k2"] = values
        elif key in ("n1", "n2", "k1", "k2", "m", "sigma", "alpha", "delta"):
            axes["alpha" if key == "delta" else key] = values
        else:
            raise ParameterError(f"unknown grid key {key!r}")
    for key in ("n1", "n2", "k1", "k2", "m"):
        if key not in axes:
            raise ParameterError(f"grid needs {key}")
    keys = list(axes)
    out = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        d = dict(zip(keys, combo))
        for k in ("n1", "n2", "k1", "k2"):
            d[k] = int(d[k])
        out.append(d)
    return out


def cmd_bounds(args) -> None:
    rows = []
    for d in parse_bound_grid(args.grid):
        q = bounds.BoundQuery(**d)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            v = bounds.evaluate(args.which, q, args.C)
        flag = "degenerate" if caught or math.isinf(v) else ""
        rows.append([args.which, q.n1, q.n2, q.k1, q.k2, q.m, q.sigma, q.alpha, v, flag])
    _write_rows(args.out, ("which", "n1", "n2", "k1", "k2", "m", "sigma", "alpha", "value",
                           "flag"), rows)


SWEEP_FLAGS = ("mode", "sizes", "snr_grid", "m", "sigma", "trials", "seed", "grid_axis",
               "rescale", "alpha", "delta", "variant")


def cmd_sweep(args) -> None:
    cfg = load_config(args.config) if args.config else {}
    for key in SWEEP_FLAGS:
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    spec = spec_from_mapping(cfg)
    result = run_sweep(spec, workers=args.threads)
    emit_csv(result, args.out_csv)
    if args.out_svg:
        emit_svg(result, args.out_svg)
    for key, x in result.crossings().items():
        label = f"{key[0]}x{key[1]} k={key[2]}x{key[3]}"
        print(f"{label}: 0.95 crossing at rescaled SNR {x if x is not None else 'not reached'}",
              file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blocksense",
                                 description="Detect and localize a weak block from "
                                             "compressive measurements.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="type I/II errors of the all-ones sum test")
    _dims(p)
    p.add_argument("--mu", default="0", help="comma separated amplitudes")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("localize-passive", help="least-squares search from Gaussian designs")
    _dims(p)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--m", type=int, default=100)
    p.set_defaults(func=cmd_localize_passive)

    p = sub.add_parser("localize-active", help="adaptive binary search localization")
    _dims(p)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--budget", type=int, default=11000)
    p.add_argument("--delta", type=float, default=0.05 / 8)
    p.add_argument("--variant", choices=("proof", "box"), default="proof")
    p.set_defaults(func=cmd_localize_active)

    p = sub.add_parser("bounds", help="evaluate threshold formulas on a grid")
    p.add_argument("--which", choices=sorted(bounds.BOUNDS), required=True)
    p.add_argument("--grid", required=True,
                   help="e.g. 'n=64 k=2,4,8 m=100 sigma=1 alpha=0.05'")
    p.add_argument("--C", type=float, default=1.0, help="unspecified universal constant")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="success probability vs rescaled SNR")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("detect", "passive", "active"))
    p.add_argument("--sizes", help="e.g. '16:4,36:6,64:8'")
    p.add_argument("--snr-grid", dest="snr_grid", help="comma list or linspace:a:b:n")
    p.add_argument("--grid-axis", dest="grid_axis", choices=("raw", "rescaled"))
    p.add_argument("--rescale")
    p.add_argument("--m", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--variant", choices=("proof", "box"))
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out-csv", dest="out_csv", required=True)
    p.add_argument("--out-svg", dest="out_svg")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARAM if exc.code else 0
    try:
        args.func(args)
    except ParameterError as exc:
        print(f"blocksense: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"blocksense: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
