"""Report container, CSV/JSON emission and golden-value regression.

Floats are written with 17 significant digits, lines end in LF, and the
JSON summary has sorted keys and no timestamps, so a rerun with the same
config and seed reproduces every file byte for byte.
"""

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

from .. import __version__
from .config import config_hash


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    if hasattr(v, "dtype"):
        return _cell(v.item())
    return str(v)


def _jsonable(v):
    if isinstance(v, float):
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "dtype"):
        return _jsonable(v.item())
    return v


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError(f"row has {len(row)} cells, header has {len(self.header)}")
        self.rows.append(list(row))

    def column(self, name):
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def records(self):
        return [dict(zip(self.header, r)) for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(c) for c in r])
        return buf.getvalue()


def read_table(path):
    """Load a CSV written by :meth:`Table.to_csv`, converting numbers back."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse(c) for c in r] for r in reader]
    return Table(header, rows)


def _parse(c):
    try:
        return int(c)
    except ValueError:
        pass
    try:
        return float(c)
    except ValueError:
        return c


@dataclass
class Report:
    experiment: str
    tables: dict
    summary: dict
    verdicts: dict
    diagnostics: dict
    golden: dict
    config: dict
    inconclusive: bool = False

    @property
    def passed(self):
        return not self.inconclusive and all(self.verdicts.values())

    @property
    def status(self):
        if self.inconclusive:
            return "inconclusive"
        return "pass" if self.passed else "fail"

    def provenance(self):
        return {"config_sha256": config_hash(self.config), "code_version": __version__, "seed": self.config["seed"]}

    def summary_json(self):
        body = {
            "experiment": self.experiment,
            "status": self.status,
            "verdicts": self.verdicts,
            "summary": self.summary,
            "diagnostics": self.diagnostics,
            "golden": self.golden,
            "tables": sorted(f"{name}.csv" for name in self.tables),
            "provenance": self.provenance(),
        }
        return json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n"

    def write(self, out_dir):
        """Write ``<table>.csv`` files and ``summary.json`` under ``out_dir``."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for name, table in self.tables.items():
            path = os.path.join(out_dir, f"{name}.csv")
            _write_text(path, table.to_csv())
            paths[name] = path
        _write_text(os.path.join(out_dir, "summary.json"), self.summary_json())
        return paths


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ------------------------------------------------------------------ goldens


def golden_path(golden_dir, experiment, digest):
    """Goldens are keyed by experiment and config hash (which covers the seed)."""
    return os.path.join(golden_dir, f"{experiment}-{digest[:16]}.json")


def check_golden(report, golden_dir, update=False, rtol=1e-9):
    """Compare ``report.golden`` to the stored values, writing them if absent.

    Returns ``(status, mismatches)`` with status ``written``, ``matched`` or
    ``mismatch``.
    """
    path = golden_path(golden_dir, report.experiment, config_hash(report.config))
    values = _jsonable(report.golden)
    if update or not os.path.exists(path):
        os.makedirs(golden_dir, exist_ok=True)
        _write_text(path, json.dumps(values, sort_keys=True, indent=2) + "\n")
        return "written", []
    with open(path, encoding="utf-8") as fh:
        stored = json.load(fh)
    mismatches = []
    for key in sorted(set(stored) | set(values)):
        a, b = stored.get(key), values.get(key)
        if not _close(a, b, rtol):
            mismatches.append({"key": key, "golden": a, "current": b})
    return ("matched" if not mismatches else "mismatch"), mismatches


def _close(a, b, rtol):
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        return abs(a - b) <= rtol * max(abs(a), abs(b)) or a == b
    return a == b
