"""Evaluation reports: per-sample rows (CSV) and their aggregates (JSON).

Aggregates are pure functions of the rows, so :func:`check_report` can
recompute them from ``rows.csv`` alone. Wall-clock timings go to a separate
``timing.json`` to keep the report files byte-identical across reruns.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

# row column -> (aggregate name, reduction)
METRICS = {
    "clean_correct": ("clean_accuracy", "mean"),
    "adv_correct": ("robust_accuracy", "mean"),
    "success": ("attack_success_rate", "mean"),
    "perturbation_norm": ("mean_perturbation_norm", "mean"),
    "queries": ("total_queries", "sum"),
    "correct": ("accuracy", "mean"),
}


def _group_key(row, group_by) -> str:
    return "|".join(f"{k}={row[k]}" for k in group_by) if group_by else "all"


def aggregate(rows, group_by=()) -> dict:
    """Per-group metrics for every metric column present in ``rows``."""
    groups: dict[str, list] = {}
    for row in rows:
        groups.setdefault(_group_key(row, group_by), []).append(row)
    out = {}
    for key in sorted(groups):
        members = groups[key]
        stats = {"n": len(members)}
        for col, (name, how) in METRICS.items():
            if col in members[0]:
                values = np.array([float(r[col]) for r in members])
                stats[name] = float(values.sum() if how == "sum" else values.mean())
        out[key] = stats
    return out


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


def _parse(value: str):
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            pass
    return value


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_report(directory, rows, meta: dict, group_by=(), timing: dict | None = None) -> dict:
    """Write rows.csv, report.json and (optionally) timing.json; return the report."""
    rows = sorted(rows, key=lambda r: tuple(str(r[k]) for k in group_by) + (r.get("index", 0),))
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    report = {"meta": meta, "group_by": list(group_by), "aggregates": aggregate(rows, group_by)}
    (d / "rows.csv").write_text(rows_to_csv(rows))
    (d / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if timing is not None:
        (d / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return report


def check_report(directory) -> bool:
    """Recompute the aggregates from rows.csv; raise if they disagree."""
    d = Path(directory)
    report = json.loads((d / "report.json").read_text())
    rows = read_rows(d / "rows.csv")
    again = aggregate(rows, tuple(report["group_by"]))
    if again != report["aggregates"]:
        raise ValueError(f"{d}: aggregates do not match rows")
    return True


def attack_rows(result, x, y, clean_pred, adv_pred, **tags) -> list[dict]:
    """One row per sample of an image attack.

    White-box attacks make no model queries in the black-box sense, so
    their rows carry 0 unless the attack reports per-sample counts.
    """
    queries = result.extra.get("queries_per_sample", np.zeros(len(y), dtype=np.int64))
    return [
        {
            **tags,
            "index": i,
            "label": int(y[i]),
            "clean_pred": int(clean_pred[i]),
            "adv_pred": int(adv_pred[i]),
            "clean_correct": bool(clean_pred[i] == y[i]),
            "adv_correct": bool(adv_pred[i] == y[i]),
            "success": bool(result.success[i]),
            "perturbation_norm": float(result.perturbation_norm[i]),
            "queries": int(queries[i]),
        }
        for i in range(len(y))
    ]


def node_rows(graph, predictions, idx, **tags) -> list[dict]:
    """One row per evaluated node for each named model."""
    return [
        {**tags, "model": name, "index": int(u), "label": int(graph.labels[u]), "pred": int(pred[u]), "correct": bool(pred[u] == graph.labels[u])}
        for name, pred in predictions.items()
        for u in idx
    ]
