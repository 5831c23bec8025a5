"""Seeded sweeps over one scenario axis, CSV datasets and deterministic plots.

CSV schema (column order is fixed; ``M`` per-user columns close each row)::

    kind, axis, value, seed, epsilon, robust, status, finite,
    sum_rate_bps, weighted_rate_bps, certified_rate_bps, mc_mean_bps, mc_min_bps,
    outer_iterations, wall_time_s, rate_user_1 ... rate_user_M

``kind`` is ``data`` for one (series, value, seed) run and ``mean`` for the
average over seeds of one (series, value).  A series is one epsilon of a
robust sweep (a single series for perfect-CSI sweeps).  ``sum_rate_bps`` is
the unweighted sum of the per-user rates on the true channel; the robust
columns are empty for perfect-CSI rows.  Failed runs keep their row with
``status`` set to the error and ``finite = 0``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithm import AlgorithmOptions, run_algorithm1, run_robust
from .scenario import SystemConfig, desk_config
from .sca import SubproblemError

logger = logging.getLogger(__name__)

AXES = ("p_max_dbm", "n_tx", "n_irs", "epsilon", "weights")
BASE_COLUMNS = ("kind", "axis", "value", "seed", "epsilon", "robust", "status", "finite",
                "sum_rate_bps", "weighted_rate_bps", "certified_rate_bps", "mc_mean_bps",
                "mc_min_bps", "outer_iterations", "wall_time_s")
INTEGER = ("seed", "finite", "robust", "outer_iterations")
NUMERIC = ("sum_rate_bps", "weighted_rate_bps", "certified_rate_bps", "mc_mean_bps",
           "mc_min_bps", "outer_iterations", "wall_time_s")


def columns(n_users):
    return BASE_COLUMNS + tuple(f"rate_user_{m + 1}" for m in range(n_users))


@dataclass(frozen=True)
class SweepSpec:
    """One swept ``axis`` with its ``values`` over ``seeds`` seeds of ``base``.

    Seeds are ``base.seed, base.seed + 1, ...``.  With ``robust`` set every
    point runs the robust pipeline once per entry of ``epsilons``; the
    ``epsilon`` axis implies ``robust``.
    """

    axis: str
    values: tuple
    seeds: int = 5
    base: SystemConfig = field(default_factory=desk_config)
    robust: bool = False
    epsilons: tuple = (0.0,)
    options: AlgorithmOptions = field(default_factory=AlgorithmOptions)
    workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"invalid axis {self.axis!r}; choose one of {', '.join(AXES)}")
        if not self.values:
            raise ValueError("a sweep needs at least one value")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        object.__setattr__(self, "values", tuple(_normalise_value(self.axis, v) for v in self.values))
        if self.axis == "epsilon":
            object.__setattr__(self, "robust", True)
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons) or (0.0,))

    @property
    def series(self):
        if self.axis == "epsilon" or not self.robust:
            return (None,)
        return self.epsilons

    def points(self):
        """``(series_eps, value, seed)`` in output order."""
        return [(e, v, self.base.seed + s) for e in self.series for v in self.values
                for s in range(self.seeds)]


def _normalise_value(axis, value):
    if axis == "weights":
        if isinstance(value, str):
            value = value.replace(",", " ").split()
        return tuple(float(w) for w in value)
    if axis in ("n_tx", "n_irs"):
        return int(value)
    return float(value)


def format_value(value):
    if isinstance(value, tuple):
        return " ".join(f"{w:g}" for w in value)
    return f"{value:g}" if isinstance(value, float) else str(value)


def point_config(spec, value, seed):
    return spec.base.replace(**{spec.axis: value, "seed": seed})


def run_point(cfg, robust, eps, options):
    """One run reduced to a CSV row (without the sweep coordinates)."""
    row = {"robust": int(robust), "epsilon": eps if robust else "", "status": "ok"}
    try:
        if robust:
            rec = run_robust(cfg, eps=eps, options=options)
        else:
            rec = run_algorithm1(cfg, options=options)
    except SubproblemError as exc:
        row.update(status=str(exc), finite=0, outer_iterations="", wall_time_s="")
        for m in range(cfg.n_users):
            row[f"rate_user_{m + 1}"] = math.nan
        row.update(sum_rate_bps=math.nan, weighted_rate_bps=math.nan)
        return row
    per_user = list(rec.per_user)
    row.update(sum_rate_bps=float(sum(per_user)),
               weighted_rate_bps=float(np.dot(cfg.weights, per_user)),
               outer_iterations=rec.outer_iterations, wall_time_s=rec.wall_time)
    if robust:
        row.update(certified_rate_bps=rec.certified_rate, mc_mean_bps=rec.mc_mean, mc_min_bps=rec.mc_min)
    for m, r in enumerate(per_user):
        row[f"rate_user_{m + 1}"] = float(r)
    return row


def _task(args):
    cfg, robust, eps, options = args
    return run_point(cfg, robust, eps, options)


def _finite(row, cols):
    vals = [row.get(c, "") for c in cols if c in NUMERIC or c.startswith("rate_user_")]
    return all(v == "" or v is None or math.isfinite(float(v)) for v in vals)


def run_sweep(spec):
    """Run every point of ``spec``; returns rows (dicts) in schema order:
    data rows in (series, value, seed) order, then one mean row per
    (series, value)."""
    n_users = spec.base.n_users
    cols = columns(n_users)
    tasks, coords = [], []
    for eps, value, seed in spec.points():
        cfg = point_config(spec, value, seed)
        robust = spec.robust
        run_eps = value if spec.axis == "epsilon" else (eps if eps is not None else 0.0)
        tasks.append((cfg, robust, run_eps, spec.options))
        coords.append((eps, value, seed, run_eps))
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    rows = []
    for (eps, value, seed, run_eps), res in zip(coords, results):
        row = dict.fromkeys(cols, "")
        row.update(res)
        row.update(kind="data", axis=spec.axis, value=format_value(value), seed=seed)
        if spec.robust:
            row["epsilon"] = run_eps
        row["finite"] = int(res.get("finite", 1) == 1 and _finite(row, cols))
        if not row["finite"]:
            logger.warning("non-finite result at %s=%s seed=%s: %s", spec.axis, row["value"], seed, row["status"])
        rows.append(row)

    for eps in spec.series:
        for value in spec.values:
            group = [r for (e, v, _, _), r in zip(coords, rows) if e == eps and v == value]
            rows.append(_mean_row(group, cols))
    return rows


def _mean_row(group, cols):
    row = dict.fromkeys(cols, "")
    first = group[0]
    row.update(kind="mean", axis=first["axis"], value=first["value"], seed="",
               epsilon=first["epsilon"], robust=first["robust"])
    ok = all(r["finite"] for r in group)
    row["status"] = "ok" if ok else "contains failed runs"
    for c in cols:
        if c in NUMERIC or c.startswith("rate_user_"):
            vals = [r[c] for r in group if r[c] != ""]
            row[c] = float(np.mean(vals)) if vals else ""
    row["finite"] = int(ok and _finite(row, cols))
    return row


def _fmt_cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_csv(rows, out=None):
    """Rows as CSV text (or into the open file ``out``)."""
    if not rows:
        raise ValueError("empty dataset")
    cols = list(rows[0].keys())
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt_cell(r[c]) for c in cols])
    return buf.getvalue() if out is None else None


def read_csv(text):
    """Parse sweep CSV text back into rows; numeric cells become floats."""
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in raw.items():
            if v == "":
                row[k] = ""
            elif k in INTEGER and v.lstrip("-").isdigit():
                row[k] = int(v)
            elif k in NUMERIC or k in INTEGER or k.startswith("rate_user_") or k == "epsilon":
                row[k] = float(v)
            else:
                row[k] = v
        rows.append(row)
    if not rows:
        raise ValueError("empty dataset")
    return rows


def all_finite(rows):
    return all(int(r["finite"]) == 1 for r in rows)


# ---------------------------------------------------------------------------
# Plots
# ---------------------------------------------------------------------------

PLOT_KINDS = ("convergence", "rate")
AXIS_LABELS = {"p_max_dbm": "P_max [dBm]", "n_tx": "N_TX", "n_irs": "N_IRS",
               "epsilon": "epsilon", "weights": "weights"}


def _svg_bytes(fig):
    import matplotlib

    buf = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "irsbf", "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def convergence_figure(histories, labels=None):
    """Best-so-far rate against the outer iteration, one line per history (bit/s)."""
    from matplotlib.figure import Figure

    if not histories:
        raise ValueError("empty dataset")
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    for i, h in enumerate(histories):
        label = labels[i] if labels else None
        ax.plot(range(len(h)), np.asarray(h) / 1e9, marker="o", label=label)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("weighted sum rate [Gbit/s]")
    ax.grid(True, alpha=0.3)
    if labels:
        ax.legend()
    fig.tight_layout()
    return fig


def rate_figure(rows):
    """Mean rate against the swept value, one line per epsilon series.

    Robust series show the certified rate, perfect-CSI series the sum rate.
    """
    from matplotlib.figure import Figure

    means = [r for r in rows if r["kind"] == "mean"]
    if not means:
        raise ValueError("empty dataset")
    axis = means[0]["axis"]
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    series = {}
    for r in means:
        key = r["epsilon"] if axis != "epsilon" else ""
        series.setdefault(key, []).append(r)
    for key, group in series.items():
        robust = bool(group[0]["robust"]) and group[0]["certified_rate_bps"] != ""
        metric = "certified_rate_bps" if robust else "sum_rate_bps"
        xs = list(range(len(group))) if axis == "weights" else [float(r["value"]) for r in group]
        ys = [float(r[metric]) / 1e9 if r[metric] != "" else math.nan for r in group]
        label = f"epsilon = {key:g}" if robust and key != "" else ("robust" if robust else "perfect CSI")
        ax.plot(xs, ys, marker="o", label=label)
        if axis == "weights":
            ax.set_xticks(xs, [r["value"] for r in group])
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("rate [Gbit/s]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def emit_plot(source, kind, path):
    """Write an SVG plot; ``source`` is sweep rows (``rate``) or a list of run
    records as dicts or JSON text (``convergence``).  Identical input gives
    identical bytes.  Returns the path."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose one of {', '.join(PLOT_KINDS)}")
    if not source:
        raise ValueError("empty dataset")
    if kind == "rate":
        fig = rate_figure(source)
    else:
        records = [json.loads(s) if isinstance(s, str) else s for s in source]
        labels = [f"eps = {r.get('epsilon', 0):g}" for r in records] if len(records) > 1 else None
        fig = convergence_figure([r["history_bps"] for r in records], labels)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_svg_bytes(fig))
    return path
