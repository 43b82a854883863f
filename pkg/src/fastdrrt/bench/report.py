"""Result files: per-run CSV, per-(scenario, planner) summary, fixed-width histograms and their plots."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

RUN_COLUMNS = ("scenario", "segment", "mode", "seed", "clock", "solved", "time_to_first", "iterations_to_first",
               "cost_first", "cost_at_budget", "iterations", "checked")
SUMMARY_COLUMNS = ("scenario", "mode", "clock", "runs", "solved", "mean_time_first", "worst_time_first",
                   "median_time_first", "mean_cost_first", "mean_cost_budget")
HIST_COLUMNS = ("scenario", "mode", "bin_lo", "bin_hi", "count")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def summarize(records) -> list:
    """Aggregates, one row per (scenario, mode)."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.scenario, r.mode, r.clock)].append(r)
    rows = []
    for (sc, mode, clock), rs in sorted(groups.items()):
        ok = [r for r in rs if r.solved]
        t = [r.time_to_first for r in ok]
        c1 = [r.cost_first for r in ok]
        cb = [r.cost_at_budget for r in ok if r.cost_at_budget is not None]
        rows.append((
            sc, mode, clock, len(rs), len(ok),
            float(np.mean(t)) if t else None,
            float(np.max(t)) if t else None,
            float(np.median(t)) if t else None,
            float(np.mean(c1)) if c1 else None,
            float(np.mean(cb)) if cb else None,
        ))
    return rows


def histogram_rows(records, attr: str, bins: int = 20) -> list:
    """Fixed-width bins per scenario, shared by all modes so the planners line up."""
    by_scenario = defaultdict(list)
    for r in records:
        by_scenario[r.scenario].append(r)
    rows = []
    for sc, rs in sorted(by_scenario.items()):
        vals = [getattr(r, attr) for r in rs if r.solved]
        if vals:
            lo, hi = float(min(vals)), float(max(vals))
        else:
            lo, hi = 0.0, 1.0
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        for mode in sorted({r.mode for r in rs}):
            x = [getattr(r, attr) for r in rs if r.mode == mode and r.solved]
            counts, _ = np.histogram(x, bins=edges)
            rows.extend((sc, mode, float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(bins))
    return rows


def _plot(rows, path: Path, xlabel: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scenarios = sorted({r[0] for r in rows})
    fig, axes = plt.subplots(len(scenarios), 1, figsize=(6, 2.6 * len(scenarios)), squeeze=False)
    for ax, sc in zip(axes[:, 0], scenarios):
        modes = sorted({r[1] for r in rows if r[0] == sc})
        for k, mode in enumerate(modes):
            rs = [r for r in rows if r[0] == sc and r[1] == mode]
            lo = np.array([r[2] for r in rs])
            width = np.array([r[3] - r[2] for r in rs])
            ax.bar(lo, [r[4] for r in rs], width=width, align="edge", alpha=0.55, label=mode,
                   color=f"C{k}", edgecolor="black", linewidth=0.4)
        ax.set_title(sc, fontsize=9)
        ax.set_ylabel("runs")
        ax.legend(fontsize=8)
    axes[-1, 0].set_xlabel(xlabel)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def emit_results(records, out_dir, bins: int = 20, figures: bool = True) -> dict:
    """Write runs.csv, summary.csv, hist_time.csv, hist_cost.csv (+ PNG plots); returns the paths."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "runs": out / "runs.csv",
        "summary": out / "summary.csv",
        "hist_time": out / "hist_time.csv",
        "hist_cost": out / "hist_cost.csv",
    }
    ordered = sorted(records, key=lambda r: (r.scenario, r.segment, r.mode, r.seed))
    _write(paths["runs"], RUN_COLUMNS, ([getattr(r, c) for c in RUN_COLUMNS] for r in ordered))
    _write(paths["summary"], SUMMARY_COLUMNS, summarize(ordered))
    t_rows = histogram_rows(ordered, "time_to_first", bins)
    c_rows = histogram_rows(ordered, "cost_first", bins)
    _write(paths["hist_time"], HIST_COLUMNS, t_rows)
    _write(paths["hist_cost"], HIST_COLUMNS, c_rows)
    if figures:
        unit = "ms" if ordered[0].clock == "wall" else "iterations"
        paths["hist_time_png"] = out / "hist_time.png"
        paths["hist_cost_png"] = out / "hist_cost.png"
        _plot(t_rows, paths["hist_time_png"], f"time to first solution [{unit}]")
        _plot(c_rows, paths["hist_cost_png"], "cost of first solution [rad]")
    return paths


def read_histogram(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(r["scenario"], r["mode"], float(r["bin_lo"]), float(r["bin_hi"]), int(r["count"])) for r in rows]


__all__ = ["RUN_COLUMNS", "SUMMARY_COLUMNS", "HIST_COLUMNS", "summarize", "histogram_rows", "emit_results",
           "read_histogram"]
