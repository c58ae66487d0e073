from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Union

from .runner import RunReport

CSV_COLUMNS = ("method", "gate_tau", "category", "mat", "modeled_speedup", "walltime_speedup")


def _as_list(reports: Union[RunReport, Iterable[RunReport]]) -> list[RunReport]:
    return [reports] if isinstance(reports, RunReport) else list(reports)


def report_json(reports) -> str:
    payload = {"reports": [r.to_dict() for r in _as_list(reports)]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def strip_wallclock(obj: Any) -> Any:
    """Drop every field whose name starts with ``wall`` (they vary run to run)."""
    if isinstance(obj, dict):
        return {k: strip_wallclock(v) for k, v in obj.items() if not k.startswith("wall")}
    if isinstance(obj, list):
        return [strip_wallclock(v) for v in obj]
    return obj


def csv_rows(reports) -> list[dict[str, Any]]:
    rows = []
    for r in _as_list(reports):
        for cat in r.categories:
            rows.append({
                "method": r.method,
                "gate_tau": "" if r.gate is None else r.gate["tau"],
                "category": cat,
                "mat": "" if r.mat_by_category.get(cat) is None else r.mat_by_category[cat],
                "modeled_speedup": r.modeled_speedup_by_category.get(cat, ""),
                "walltime_speedup": r.walltime_speedup_by_category.get(cat, ""),
            })
    return rows


def emit_report(reports, path, fmt: str = "json") -> None:
    """Write one or more reports as JSON (full step logs) or CSV (one row per method and category)."""
    path = Path(path)
    if fmt == "json":
        path.write_text(report_json(reports), encoding="utf-8")
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(csv_rows(reports))
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path) -> list[RunReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [RunReport.from_dict(d) for d in data["reports"]]
