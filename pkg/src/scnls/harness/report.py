"""Writing run records to disk.

Layout: ``<out>/<experiment>/<config hash>/`` containing ``table.csv``,
``summary.json``, ``fields/*.bin`` (binary snapshots) and ``plots/`` with a
CSV of the plotted series plus a PNG per figure.  Everything except the
wall-clock entry of the summary and the PNGs is a deterministic function of
the config.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from ..fieldio import write_field
from .record import RunRecord, _plain


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    try:
        return "%.17g" % float(v)
    except (TypeError, ValueError):
        return str(v)


def write_table(rec: RunRecord, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rec.columns)
        for row in rec.rows:
            w.writerow([_fmt(row[c]) for c in rec.columns])
    return path


SCOPE = ("Finite tables show trends toward iterated limits; "
         "a passed assertion is a monotone trend at these parameters, not a proof of the limit.")


def summary_dict(rec: RunRecord, config=None):
    return {
        "scope": SCOPE,
        "experiment": rec.experiment,
        "config_hash": rec.config_hash,
        "passed": rec.passed,
        "tainted": rec.tainted,
        "assertions": [a.to_dict() for a in rec.assertions],
        "canonical_potential": rec.potential,
        "notes": list(rec.notes),
        "measurements": _plain(rec.extra),
        "config": config,
        "wall_clock_seconds": rec.wall_clock,
    }


def emit_reports(rec: RunRecord, out_root, config=None, plots=True):
    """Write every artifact of ``rec``; returns the run directory."""
    run_dir = Path(out_root) / rec.experiment / rec.config_hash
    (run_dir / "fields").mkdir(parents=True, exist_ok=True)
    write_table(rec, run_dir / "table.csv")
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary_dict(rec, config), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    for name in sorted(rec.fields):
        write_field(run_dir / "fields" / f"{name}.bin", rec.fields[name])
    if rec.plots:
        pdir = run_dir / "plots"
        pdir.mkdir(exist_ok=True)
        for plot in rec.plots:
            with open(pdir / f"{plot.name}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["series", plot.xlabel, plot.ylabel])
                for label, (xs, ys) in plot.series.items():
                    for x, y in zip(xs, ys):
                        w.writerow([label, _fmt(float(x)), _fmt(float(y))])
            if plots:
                from .plotting import render

                render(plot, pdir / f"{plot.name}.png")
    return run_dir


def format_assertions(rec: RunRecord):
    lines = []
    for a in rec.assertions:
        mark = "PASS" if a.passed else "FAIL"
        lines.append(f"[{mark}] {a.name}: measured={_plain(a.measured)} threshold={_plain(a.threshold)}"
                     + (f" ({a.detail})" if a.detail else ""))
    return "\n".join(lines)


def format_table(rec: RunRecord, limit=None):
    rows = rec.rows if limit is None else rec.rows[:limit]
    head = ",".join(rec.columns)
    body = "\n".join(",".join(_fmt(r[c]) for c in rec.columns) for r in rows)
    return head + "\n" + body
