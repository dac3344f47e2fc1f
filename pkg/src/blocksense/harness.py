"""Monte Carlo sweeps of success probability against (rescaled) SNR.

Every trial gets its own random stream keyed by ``(curve, point, trial)``
so results do not depend on how the work is split across processes.
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import bounds
from .active import UNITS_TOTAL, active_trial
from .core import STREAM_INSTANCE, STREAM_NOISE, ParameterError, RngHandle, sample_instance
from .detect import run_detection
from .passive import passive_trial

MODES = ("detect", "passive", "active")
RESCALE_RULES = ("none", "passive", "detect", "active-small-k", "active-large-k",
                 "active-theory")
DEFAULT_RESCALE = {"detect": "detect", "passive": "passive", "active": "active-small-k"}

CSV_COLUMNS = ("mode", "n1", "n2", "k1", "k2", "m", "sigma", "snr", "snr_rescaled",
               "successes", "trials", "phat", "stderr", "theory_lb", "theory_ub")


def rescale_factor(rule: str, n1: int, n2: int, k1: int, k2: int, m: float) -> float:
    """Multiplier taking ``mu / sigma`` to the rescaled abscissa."""
    kmin, kmax = min(k1, k2), max(k1, k2)
    if rule == "none":
        return 1.0
    if rule == "passive":
        return math.sqrt(m * kmin / (n1 * n2))
    if rule in ("detect", "active-small-k"):
        return math.sqrt(m) * k1 * k2 / math.sqrt(n1 * n2)
    if rule == "active-large-k":
        if kmax < 2:
            raise ParameterError("large-block rescaling needs k >= 2")
        return math.sqrt(m * kmin / math.log(kmax))
    if rule == "active-theory":
        shape = max(math.sqrt(n1 * n2 / (m * k1 ** 2 * k2 ** 2)), math.sqrt(1 / (kmin * m)))
        return 1.0 / shape
    raise ParameterError(f"unknown rescaling rule {rule!r}")


def rescale_snr(mode: str, n1: int, n2: int, k1: int, k2: int, m: float, snr: float,
                rule: str | None = None) -> float:
    rule = rule or DEFAULT_RESCALE[mode]
    return snr * rescale_factor(rule, n1, n2, k1, k2, m)


@dataclass
class SweepSpec:
    """What to simulate.

    ``m`` is the number of measurements for ``detect``/``passive`` and the
    budget unit for ``active`` (total budget ``22 m``). ``snr_grid`` is read
    on the axis named by ``grid_axis``. ``delta`` is the per-stage failure
    level of the adaptive procedure.
    """

    mode: str
    sizes: list[tuple[int, int, int, int]]
    snr_grid: list[float]
    m: int = 100
    sigma: float = 1.0
    trials: int = 100
    seed: int = 0
    grid_axis: str = "raw"
    rescale: str | None = None
    alpha: float = 0.05
    delta: float = 0.05 / 8
    variant: str = "proof"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if not self.sizes or not len(self.snr_grid):
            raise ParameterError("sizes and snr_grid must be nonempty")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.grid_axis not in ("raw", "rescaled"):
            raise ParameterError("grid_axis must be 'raw' or 'rescaled'")
        if self.rescale is None:
            self.rescale = DEFAULT_RESCALE[self.mode]
        if self.rescale not in RESCALE_RULES:
            raise ParameterError(f"unknown rescaling rule {self.rescale!r}")
        self.sizes = [tuple(int(v) for v in s) for s in self.sizes]
        self.snr_grid = [float(v) for v in self.snr_grid]

    @property
    def budget(self) -> int:
        return UNITS_TOTAL * self.m if self.mode == "active" else self.m

    def points(self):
        """``(curve, point, size, snr_raw, snr_rescaled)`` for every grid point."""
        for ci, (n1, n2, k1, k2) in enumerate(self.sizes):
            f = rescale_factor(self.rescale, n1, n2, k1, k2, self.m)
            for pi, v in enumerate(self.snr_grid):
                raw = v if self.grid_axis == "raw" else v / f
                yield ci, pi, (n1, n2, k1, k2), raw, raw * f


@dataclass
class SweepResult:
    rows: list[dict]
    audit: list[dict] = field(default_factory=list)

    def curves(self) -> dict[tuple, list[dict]]:
        out: dict[tuple, list[dict]] = {}
        for r in self.rows:
            out.setdefault((r["n1"], r["n2"], r["k1"], r["k2"]), []).append(r)
        return out

    def crossings(self, level: float = 0.95) -> dict[tuple, float | None]:
        """Smallest rescaled abscissa per curve with ``phat >= level``."""
        out = {}
        for key, rows in self.curves().items():
            hits = [r["snr_rescaled"] for r in rows if r["phat"] >= level]
            out[key] = min(hits) if hits else None
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _theory(spec: SweepSpec, n1, n2, k1, k2) -> tuple[float, float]:
    """Reference thresholds in SNR units (``mu / sigma``)."""
    if spec.mode == "detect":
        q = bounds.BoundQuery(n1, n2, k1, k2, spec.m, 1.0, spec.alpha)
        lb = bounds.detection_lb(q) if k1 < n1 and k2 < n2 else math.nan
        return lb, bounds.detection_ub(q)
    if spec.mode == "passive":
        q = bounds.BoundQuery(n1, n2, k1, k2, spec.m, 1.0, spec.alpha)
        return bounds.passive_loc_lb(q), bounds.passive_loc_ub(q)
    q = bounds.BoundQuery(n1, n2, k1, k2, spec.m, 1.0, min(1.0, 8 * spec.delta))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bounds.DegenerateBound)
        lb = bounds.active_loc_lb(q.with_(alpha=spec.alpha))
    return lb, bounds.active_loc_ub(q)


def _detect_trial(n1, n2, k1, k2, mu, sigma, m, alpha, handle: RngHandle) -> bool:
    """Correct on both a null run and an alternative run."""
    g0 = handle.child(0, STREAM_NOISE).generator()
    null = sample_instance(n1, n2, k1, k2, 0.0, sigma, handle.child(0, STREAM_INSTANCE).generator())
    alt = sample_instance(n1, n2, k1, k2, mu, sigma, handle.child(1, STREAM_INSTANCE).generator())
    ok_null = not run_detection(null, m, alpha, g0).reject
    ok_alt = run_detection(alt, m, alpha, handle.child(1, STREAM_NOISE).generator()).reject
    return ok_null and ok_alt


def _run_point(args) -> tuple[int, list[dict]]:
    spec, ci, pi, size, raw = args
    n1, n2, k1, k2 = size
    base = RngHandle(spec.seed, (ci, pi))
    mu = raw * spec.sigma
    hits = 0
    audit = []
    for t in range(spec.trials):
        h = base.child(t)
        if spec.mode == "passive":
            ok = passive_trial(n1, n2, k1, k2, mu, spec.sigma, spec.m, h)["success"]
        elif spec.mode == "detect":
            ok = _detect_trial(n1, n2, k1, k2, mu, spec.sigma, spec.m, spec.alpha, h)
        else:
            res = active_trial(n1, n2, k1, k2, mu, spec.sigma, spec.budget, spec.delta, h,
                               spec.variant)
            ok = res["success"]
            audit.append({"curve": ci, "point": pi, "trial": t, "m_unit": res["m_unit"],
                          "budget": spec.budget, "spent_total": res["spent_total"],
                          **{f"spent_{k}": v for k, v in res["spent"].items()}})
        hits += bool(ok)
    return hits, audit


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run every grid point; rows come back in grid order regardless of ``workers``."""
    workers = spec.workers if workers is None else workers
    pts = list(spec.points())
    jobs = [(spec, ci, pi, size, raw) for ci, pi, size, raw, _ in pts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    rows, audit = [], []
    for (ci, pi, (n1, n2, k1, k2), raw, resc), (hits, aud) in zip(pts, results):
        p = hits / spec.trials
        lb, ub = _theory(spec, n1, n2, k1, k2)
        rows.append({"mode": spec.mode, "n1": n1, "n2": n2, "k1": k1, "k2": k2,
                     "m": spec.m, "sigma": spec.sigma, "snr": raw, "snr_rescaled": resc,
                     "successes": hits, "trials": spec.trials, "phat": p,
                     "stderr": math.sqrt(p * (1 - p) / spec.trials),
                     "theory_lb": lb, "theory_ub": ub})
        audit.extend(aud)
    return SweepResult(rows, audit)


def is_monotone(rows: list[dict], slack: float = 3.0) -> bool:
    """``phat`` non-decreasing along the curve up to ``slack`` combined stderrs."""
    for a, b in zip(rows, rows[1:]):
        tol = slack * math.hypot(a["stderr"], b["stderr"])
        if b["phat"] < a["phat"] - tol:
            return False
    return True


def emit_csv(result: SweepResult, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.to_csv())
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror}") from exc


def read_csv(path) -> list[dict]:
    ints = {"n1", "n2", "k1", "k2", "m", "successes", "trials"}
    with open(path, encoding="utf-8", newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append({k: (v if k == "mode" else int(v) if k in ints else float(v))
                        for k, v in rec.items()})
        return out


def svg_plot(result: SweepResult, width: int = 640, height: int = 420) -> str:
    """Minimal line plot: one polyline per curve, dashed line at the first curve's
    0.95 crossing."""
    ml, mr, mt, mb = 60, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = [r["snr_rescaled"] for r in result.rows] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    if x1 <= x0:
        x1 = x0 + 1.0

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(p):
        return mt + (1 - p) * ph

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
             f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle" '
             f'font-size="12">rescaled SNR</text>',
             f'<text x="14" y="{mt + ph / 2}" font-size="12" transform="rotate(-90 14 '
             f'{mt + ph / 2})" text-anchor="middle">P(success)</text>']
    for tick in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{ml - 6}" y="{sy(tick) + 4:.1f}" text-anchor="end" '
                     f'font-size="10">{tick:g}</text>')
    for tick in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{sx(tick):.1f}" y="{mt + ph + 14}" text-anchor="middle" '
                     f'font-size="10">{tick:.3g}</text>')
    for i, (key, rows) in enumerate(result.curves().items()):
        pts = " ".join(f"{sx(r['snr_rescaled']):.2f},{sy(r['phat']):.2f}" for r in rows)
        c = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{ml + 8}" y="{mt + 14 + 14 * i}" font-size="11" fill="{c}">'
                     f'n={key[0]}x{key[1]}, k={key[2]}x{key[3]}</text>')
    cross = list(result.crossings().values())
    if cross and cross[0] is not None:
        x = sx(cross[0])
        parts.append(f'<line x1="{x:.2f}" y1="{mt}" x2="{x:.2f}" y2="{mt + ph}" '
                     f'stroke="gray" stroke-dasharray="5,4"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(result: SweepResult, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg_plot(result))
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc.strerror}") from exc


# -- configuration -------------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParameterError(f"config line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def load_config(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def parse_sizes(text: str) -> list[tuple[int, int, int, int]]:
    """``"16:4, 36:6"`` (square) or ``"32x48:4x6"`` entries, comma separated."""
    sizes = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            n, k = item.split(":")
            n1, n2 = (n.split("x") * 2)[:2] if "x" in n else (n, n)
            k1, k2 = (k.split("x") * 2)[:2] if "x" in k else (k, k)
            sizes.append((int(n1), int(n2), int(k1), int(k2)))
        except ValueError:
            raise ParameterError(f"bad size entry {item!r}; use n:k or n1xn2:k1xk2") from None
    return sizes


def parse_grid(text: str) -> list[float]:
    """Comma list, or ``linspace:a:b:count`` / ``geomspace:a:b:count``."""
    text = text.strip()
    try:
        if text.startswith(("linspace:", "geomspace:")):
            kind, a, b, n = text.split(":")
            return list(getattr(np, kind)(float(a), float(b), int(n)))
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"bad grid {text!r}") from None


def spec_from_mapping(cfg: dict) -> SweepSpec:
    known = {f.name for f in fields(SweepSpec)}
    unknown = set(cfg) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    kw = dict(cfg)
    conv = {"m": int, "trials": int, "seed": int, "workers": int,
            "sigma": float, "alpha": float, "delta": float}
    try:
        for key, fn in conv.items():
            if key in kw and isinstance(kw[key], str):
                kw[key] = fn(kw[key])
    except ValueError as exc:
        raise ParameterError(str(exc)) from None
    if isinstance(kw.get("sizes"), str):
        kw["sizes"] = parse_sizes(kw["sizes"])
    if isinstance(kw.get("snr_grid"), str):
        kw["snr_grid"] = parse_grid(kw["snr_grid"])
    if kw.get("rescale") in ("", "default"):
        kw["rescale"] = None
    try:
        return SweepSpec(**kw)
    except TypeError as exc:
        raise ParameterError(str(exc)) from None


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
