"""Confusion-matrix arithmetic: per-class and aggregate classification metrics.

Orientation is fixed: rows are the predicted class, columns the true class.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassOutOfRange, EmptyInput, LengthMismatch

CSV_HEADER = "method,class,sensitivity,specificity,precision,f1,accuracy"


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K count table; counts[p][t] = examples predicted p with truth t."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (arr < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")
        if arr.sum() == 0:
            raise EmptyInput("confusion matrix has no observations")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    accuracy: float
    support: int
    degenerate: bool = False


@dataclass(frozen=True)
class MetricReport:
    per_class: tuple
    overall_accuracy: float
    kappa: float
    macro: ClassMetrics = field(repr=False, default=None)


def build_cm(pred, truth, k: int) -> ConfusionMatrix:
    pred = list(pred)
    truth = list(truth)
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} truths")
    if not pred:
        raise EmptyInput("need at least one prediction/truth pair")
    counts = np.zeros((k, k), dtype=np.int64)
    for p, t in zip(pred, truth):
        if not (0 <= p < k) or not (0 <= t < k):
            raise ClassOutOfRange(f"pair ({p}, {t}) with k={k}")
        counts[p, t] += 1
    return ConfusionMatrix(counts)


def _safe_div(num: float, den: float):
    """Ratio, or (0.0, True) when the denominator is empty."""
    if den == 0:
        return 0.0, True
    return num / den, False


def metrics(cm: ConfusionMatrix) -> MetricReport:
    """One-vs-rest metrics per class plus overall accuracy and Cohen's kappa."""
    counts = cm.counts.astype(np.float64)
    total = float(cm.total)
    row = counts.sum(axis=1)  # predicted-class totals
    col = counts.sum(axis=0)  # true-class totals
    per_class = []
    for c in range(cm.k):
        tp = counts[c, c]
        fp = row[c] - tp
        fn = col[c] - tp
        tn = total - tp - fp - fn
        sens, d1 = _safe_div(tp, tp + fn)
        spec, d2 = _safe_div(tn, tn + fp)
        prec, d3 = _safe_div(tp, tp + fp)
        f1, d4 = _safe_div(2.0 * prec * sens, prec + sens)
        acc = (tp + tn) / total
        per_class.append(
            ClassMetrics(
                label=c,
                sensitivity=sens,
                specificity=spec,
                precision=prec,
                f1=f1,
                accuracy=acc,
                support=int(col[c]),
                degenerate=d1 or d2 or d3 or d4,
            )
        )
    overall = float(np.trace(counts) / total)
    p_e = float(np.dot(row, col) / (total * total))
    if p_e >= 1.0:
        kappa = 1.0 if overall >= 1.0 else 0.0
    else:
        kappa = (overall - p_e) / (1.0 - p_e)
    macro = ClassMetrics(
        label=-1,
        sensitivity=float(np.mean([m.sensitivity for m in per_class])),
        specificity=float(np.mean([m.specificity for m in per_class])),
        precision=float(np.mean([m.precision for m in per_class])),
        f1=float(np.mean([m.f1 for m in per_class])),
        accuracy=overall,
        support=int(total),
        degenerate=any(m.degenerate for m in per_class),
    )
    return MetricReport(per_class=tuple(per_class), overall_accuracy=overall, kappa=kappa, macro=macro)


def positive_class_row(report: MetricReport, positive: int = 1) -> ClassMetrics:
    """Binary-task convenience: the designated positive class's one-vs-rest row."""
    for m in report.per_class:
        if m.label == positive:
            return m
    raise ClassOutOfRange(f"no class {positive} in report")


def report_table(reports, methods, class_names=None) -> str:
    """Aligned text table, one aggregate (macro) row per method.

    Binary reports additionally get a positive-class row so both readings of
    a single-number summary are visible.
    """
    reports = list(reports)
    methods = list(methods)
    if len(reports) != len(methods):
        raise LengthMismatch(f"{len(reports)} reports vs {len(methods)} methods")
    cols = ["Method", "Sensitivity", "Specificity", "Precision", "F1", "Kappa", "Accuracy"]
    rows = []
    for name, rep in zip(methods, reports):
        m = rep.macro
        rows.append(
            [
                f"{name} (macro)",
                f"{m.sensitivity:.4f}",
                f"{m.specificity:.4f}",
                f"{m.precision:.4f}",
                f"{m.f1:.4f}",
                f"{rep.kappa:.4f}",
                f"{rep.overall_accuracy:.4f}",
            ]
        )
        if len(rep.per_class) == 2:
            p = positive_class_row(rep)
            rows.append(
                [
                    f"{name} (pos=1)",
                    f"{p.sensitivity:.4f}",
                    f"{p.specificity:.4f}",
                    f"{p.precision:.4f}",
                    f"{p.f1:.4f}",
                    f"{rep.kappa:.4f}",
                    f"{rep.overall_accuracy:.4f}",
                ]
            )
    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c) for i, c in enumerate(cols)]
    out = io.StringIO()
    out.write("  ".join(c.ljust(widths[i]) for i, c in enumerate(cols)).rstrip() + "\n")
    for r in rows:
        out.write("  ".join(v.ljust(widths[i]) for i, v in enumerate(r)).rstrip() + "\n")
    return out.getvalue()


def report_csv(reports, methods, class_names=None) -> str:
    """CSV rows per class plus a macro aggregate row per method."""
    reports = list(reports)
    methods = list(methods)
    if len(reports) != len(methods):
        raise LengthMismatch(f"{len(reports)} reports vs {len(methods)} methods")
    lines = [CSV_HEADER]
    for name, rep in zip(methods, reports):
        for m in rep.per_class:
            label = class_names[m.label] if class_names else str(m.label)
            lines.append(
                f"{name},{label},{m.sensitivity:.6f},{m.specificity:.6f},"
                f"{m.precision:.6f},{m.f1:.6f},{m.accuracy:.6f}"
            )
        mac = rep.macro
        lines.append(
            f"{name},macro,{mac.sensitivity:.6f},{mac.specificity:.6f},"
            f"{mac.precision:.6f},{mac.f1:.6f},{rep.overall_accuracy:.6f}"
        )
    return "\n".join(lines) + "\n"
