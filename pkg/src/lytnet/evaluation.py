"""Evaluation metrics: accuracy, per-class precision/recall/F1, midline errors.

Angle error is the unsigned angle between predicted and true midlines treated
as undirected lines in the image plane, in [0, 90] degrees. Start/endpoint
errors are Euclidean distances in normalized coordinates. Error metrics are
reported for the clear subset, the obstructed subset, and all records.
"""

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .network import CLASS_INDEX, CLASS_NAMES


@dataclass
class EvalRecord:
    pred_class: str
    true_class: str
    pred_endpoints: Tuple[float, float, float, float]
    true_endpoints: Tuple[float, float, float, float]
    obstructed: bool = False

    def __post_init__(self):
        for label in (self.pred_class, self.true_class):
            if label not in CLASS_INDEX:
                raise ValueError(f"unknown class {label!r}")
        if len(self.pred_endpoints) != 4 or len(self.true_endpoints) != 4:
            raise ValueError("endpoints must be 4-tuples")


def read_records(path) -> List[EvalRecord]:
    """Parse EvalRecord JSONL: pred_class / true_class / pred_endpoints /
    true_endpoints / optional obstructed."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for index, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                records.append(EvalRecord(
                    pred_class=rec["pred_class"],
                    true_class=rec["true_class"],
                    pred_endpoints=tuple(float(v) for v in rec["pred_endpoints"]),
                    true_endpoints=tuple(float(v) for v in rec["true_endpoints"]),
                    obstructed=bool(rec.get("obstructed", False)),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"eval record {index}: {exc}") from None
    return records


def confusion_matrix(records: Sequence[EvalRecord]) -> np.ndarray:
    m = np.zeros((len(CLASS_NAMES), len(CLASS_NAMES)), dtype=np.int64)
    for r in records:
        m[CLASS_INDEX[r.true_class], CLASS_INDEX[r.pred_class]] += 1
    return m


def accuracy(records: Sequence[EvalRecord]) -> float:
    if not records:
        raise ValueError("no records")
    m = confusion_matrix(records)
    return float(np.trace(m)) / float(m.sum())


def f1_score(precision: Optional[float], recall: Optional[float]) -> Optional[float]:
    """Harmonic mean; None when either input is undefined or both are zero."""
    if precision is None or recall is None:
        return None
    if precision + recall == 0.0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f1(records: Sequence[EvalRecord]) -> Dict[str, dict]:
    """One-vs-rest precision/recall/F1 per class.

    A class never predicted has undefined precision; a class with zero support
    has undefined recall. Undefined values are None, never zero.
    """
    if not records:
        raise ValueError("no records")
    m = confusion_matrix(records)
    out = {}
    for i, name in enumerate(CLASS_NAMES):
        tp = float(m[i, i])
        predicted = float(m[:, i].sum())
        support = float(m[i, :].sum())
        precision = tp / predicted if predicted > 0 else None
        recall = tp / support if support > 0 else None
        out[name] = {
            "precision": precision,
            "recall": recall,
            "f1": f1_score(precision, recall),
            "support": int(support),
        }
    return out


def _direction(endpoints) -> Tuple[float, float]:
    x1, y1, x2, y2 = (float(v) for v in endpoints)
    dx, dy = x2 - x1, y2 - y1
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        raise ValueError(f"zero-length midline: {endpoints}")
    return dx / norm, dy / norm


def angle_error(pred_endpoints, true_endpoints) -> float:
    """Unsigned angle between the two midlines as undirected lines, [0, 90] deg."""
    ux, uy = _direction(pred_endpoints)
    vx, vy = _direction(true_endpoints)
    cosine = min(abs(ux * vx + uy * vy), 1.0)
    return math.degrees(math.acos(cosine))


def endpoint_errors(pred_endpoints, true_endpoints) -> Tuple[float, float]:
    """(start error, end error): Euclidean distances in normalized units."""
    px1, py1, px2, py2 = (float(v) for v in pred_endpoints)
    tx1, ty1, tx2, ty2 = (float(v) for v in true_endpoints)
    return math.hypot(px1 - tx1, py1 - ty1), math.hypot(px2 - tx2, py2 - ty2)


def _error_summary(records: Sequence[EvalRecord]) -> Optional[dict]:
    if not records:
        return None
    angles, starts, ends = [], [], []
    for r in records:
        angles.append(angle_error(r.pred_endpoints, r.true_endpoints))
        s, e = endpoint_errors(r.pred_endpoints, r.true_endpoints)
        starts.append(s)
        ends.append(e)
    return {
        "count": len(records),
        "angle_error": float(np.mean(angles)),
        "start_error": float(np.mean(starts)),
        "end_error": float(np.mean(ends)),
    }


def summarize(records: Sequence[EvalRecord]) -> dict:
    """Full metric bundle: accuracy, per-class P/R/F1, error splits."""
    if not records:
        raise ValueError("no records")
    clear = [r for r in records if not r.obstructed]
    obstructed = [r for r in records if r.obstructed]
    return {
        "count": len(records),
        "accuracy": accuracy(records),
        "per_class": precision_recall_f1(records),
        "errors": {
            "clear": _error_summary(clear),
            "obstructed": _error_summary(obstructed),
            "all": _error_summary(records),
        },
    }


def _fmt(value, digits) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def report(records: Sequence[EvalRecord], format: str = "text") -> str:
    """Render the metric bundle as an aligned text table or as JSON.

    Both formats are views of the same summary, so they carry identical
    numbers. Percentages print with two decimals, normalized errors with four.
    """
    summary = summarize(records)
    if format == "json":
        return json.dumps(summary, indent=2)
    if format != "text":
        raise ValueError(f"unknown report format {format!r} (expected 'text' or 'json')")

    lines = []
    lines.append(f"records: {summary['count']}")
    lines.append(f"accuracy: {100.0 * summary['accuracy']:.2f}%")
    lines.append("")
    lines.append(f"{'class':<16} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}")
    for name in CLASS_NAMES:
        row = summary["per_class"][name]
        lines.append(
            f"{name:<16} {_fmt(row['precision'], 2):>9} {_fmt(row['recall'], 2):>9} "
            f"{_fmt(row['f1'], 2):>9} {row['support']:>8d}"
        )
    lines.append("")
    lines.append(f"{'subset':<12} {'count':>6} {'angle err':>10} {'start err':>10} {'end err':>10}")
    for key, label in (("clear", "clear"), ("obstructed", "obstructed"), ("all", "all")):
        row = summary["errors"][key]
        if row is None:
            lines.append(f"{label:<12} (no records in subset; row omitted)")
            continue
        lines.append(
            f"{label:<12} {row['count']:>6d} {row['angle_error']:>10.2f} "
            f"{row['start_error']:>10.4f} {row['end_error']:>10.4f}"
        )
    return "\n".join(lines)
