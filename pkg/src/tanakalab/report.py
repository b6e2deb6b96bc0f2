"""Experiment reports: config echo, data tables, verdicts.

Data tables are written as CSV with ``repr`` formatting of floats so that a
rerun with the same configuration yields byte-identical files.  Run-dependent
metadata (wall clock, versions) lives only in the JSON manifest.
"""

from __future__ import annotations

import json
import math
import os
import platform
from dataclasses import dataclass, field

import numpy as np

PASS, FAIL, VACUOUS, INFO = "pass", "fail", "vacuous", "info"


@dataclass
class Verdict:
    name: str
    status: str
    detail: str = ""
    value: float | None = None
    threshold: float | None = None

    def as_dict(self):
        return {k: _plain(v) for k, v in self.__dict__.items()}

    def line(self) -> str:
        return f"[{self.status.upper():7s}] {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    wall_clock: float = 0.0
    notes: list = field(default_factory=list)

    def add_table(self, name, columns, rows):
        self.tables[name] = (list(columns), [list(r) for r in rows])

    def verdict(self, name, ok, detail="", value=None, threshold=None, vacuous=False):
        status = VACUOUS if vacuous else (PASS if ok else FAIL)
        v = Verdict(name, status, detail, value, threshold)
        self.verdicts.append(v)
        return v

    def info(self, name, detail="", value=None):
        v = Verdict(name, INFO, detail, value)
        self.verdicts.append(v)
        return v

    @property
    def passed(self) -> bool:
        return all(v.status != FAIL for v in self.verdicts)

    def table_csv(self, name) -> str:
        columns, rows = self.tables[name]
        lines = [",".join(columns)]
        lines += [",".join(_cell(x) for x in row) for row in rows]
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": _plain(self.config),
            "summary": _plain(self.summary),
            "verdicts": [v.as_dict() for v in self.verdicts],
            "passed": self.passed,
            "tables": {k: f"{self.experiment}_{k}.csv" for k in self.tables},
            "notes": list(self.notes),
            "wall_clock_seconds": self.wall_clock,
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }

    def write(self, output_dir) -> list:
        os.makedirs(output_dir, exist_ok=True)
        written = []
        for name in self.tables:
            p = os.path.join(output_dir, f"{self.experiment}_{name}.csv")
            with open(p, "w", newline="") as fh:
                fh.write(self.table_csv(name))
            written.append(p)
        p = os.path.join(output_dir, f"{self.experiment}_report.json")
        with open(p, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(p)
        return written


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x
