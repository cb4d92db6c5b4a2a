"""Experiment reports: a fixed-order JSON document plus CSV tables.

Reports are self-auditing: every PASS/FAIL verdict is recomputable from
the tables alone (the test suite ships an independent checker that does
exactly that). Wall-clock timings are recorded in a sidecar text file so
the JSON/CSV outputs stay byte-identical across runs with the same
config and seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "experiment", "config", "tables", "checks", "verdict"],
    "properties": {
        "schema_version": {"type": "integer"},
        "experiment": {"type": "string"},
        "interpretation": {"type": "string"},
        "config": {"type": "object"},
        "tables": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["columns", "rows"],
                "properties": {
                    "columns": {"type": "array", "items": {"type": "string"}},
                    "rows": {"type": "array", "items": {"type": "array"}},
                },
            },
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed", "detail"],
                "properties": {
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "detail": {"type": "string"},
                },
            },
        },
        "verdict": {"type": "string", "enum": ["PASS", "FAIL"]},
    },
}


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_dict(self) -> dict:
        return {"columns": self.columns, "rows": self.rows}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    tables: dict[str, Table] = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)
    interpretation: str = ""
    timings: dict[str, float] = field(default_factory=dict)

    def add_table(self, name: str, columns: list[str], rows: list[list]) -> Table:
        t = Table(columns, rows)
        self.tables[name] = t
        return t

    def add_check(self, name: str, passed: bool, detail: str) -> bool:
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})
        return passed

    @property
    def verdict(self) -> str:
        return "PASS" if all(c["passed"] for c in self.checks) else "FAIL"

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config": _jsonable(self.config),
            "tables": {k: t.to_dict() for k, t in sorted(self.tables.items())},
            "checks": self.checks,
            "verdict": self.verdict,
        }
        if self.interpretation:
            doc["interpretation"] = self.interpretation
        return doc


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "item"):  # numpy scalar
        return value.item()
    return value


def validate_report(doc: dict) -> None:
    import jsonschema

    jsonschema.validate(doc, REPORT_SCHEMA)


def write_report(report: ExperimentReport, outdir: str | Path, fmt: str = "csv") -> Path:
    """Write report.json (+ per-table CSVs for fmt=csv) and timings.txt."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "report.json"
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    if fmt == "csv":
        for name, table in sorted(report.tables.items()):
            with open(outdir / f"{name}.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(table.columns)
                for row in table.rows:
                    writer.writerow([_csv_cell(v) for v in row])
    if report.timings:
        with open(outdir / "timings.txt", "w") as fh:
            for k, v in report.timings.items():
                fh.write(f"{k}: {v:.3f} s\n")
    return path


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v
