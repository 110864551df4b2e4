"""Run records: tables, assertions, plots and saved fields of one experiment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Assertion:
    """One pass/fail check with the numbers it was decided on."""

    name: str
    passed: bool
    measured: object
    threshold: object = None
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "measured": _plain(self.measured),
                "threshold": _plain(self.threshold), "detail": self.detail}


@dataclass
class PlotSpec:
    """A line plot: ``series`` maps a label to ``(x, y)`` arrays."""

    name: str
    xlabel: str
    ylabel: str
    series: dict
    logx: bool = False
    logy: bool = False
    title: str = ""


@dataclass
class RunRecord:
    experiment: str
    config_hash: str
    columns: list
    rows: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    plots: list = field(default_factory=list)
    fields: dict = field(default_factory=dict)
    potential: dict = None
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def add_row(self, **values):
        missing = [c for c in self.columns if c != "config_hash" and c not in values]
        if missing:
            raise KeyError(f"row is missing columns {missing}")
        values["config_hash"] = self.config_hash
        self.rows.append(values)

    def check(self, name, passed, measured, threshold=None, detail=""):
        a = Assertion(name, bool(passed), measured, threshold, detail)
        self.assertions.append(a)
        return a

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)

    @property
    def tainted(self):
        return any(bool(r.get("tainted", False)) for r in self.rows)

    def column(self, name, **where):
        out = []
        for r in self.rows:
            if all(r.get(k) == v for k, v in where.items()):
                out.append(r[name])
        return np.array(out)


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def strictly_decreasing(values):
    v = np.asarray(values, dtype=float)
    return bool(v.size >= 2 and np.all(np.diff(v) < 0))


def fit_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
