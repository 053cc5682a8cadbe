import logging
from typing import List, Optional, Sequence

import numpy as np

from app.exceptions import DataError
from app.models.metrics import PRF, ClassMetrics, ConfusionMatrix, MetricsReport

logger = logging.getLogger(__name__)


def confusion(gold: Sequence[int], predicted: Sequence[int], n_classes: int) -> ConfusionMatrix:
    if len(gold) != len(predicted):
        raise DataError(f"gold ({len(gold)}) and predicted ({len(predicted)}) lengths differ")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for g, p in zip(gold, predicted):
        if not (0 <= g < n_classes and 0 <= p < n_classes):
            raise DataError(f"class id out of range for K={n_classes}: gold={g}, predicted={p}")
        counts[g, p] += 1
    return ConfusionMatrix(counts=counts.tolist())


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def metrics(cm: ConfusionMatrix, labels: Optional[List[str]] = None) -> MetricsReport:
    """Per-class, micro, macro and support-weighted P/R/F1 plus accuracy."""
    counts = np.asarray(cm.counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise DataError("cannot compute metrics from an empty confusion matrix")
    labels = labels or [str(i) for i in range(cm.n_classes)]

    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    support = counts.sum(axis=1)

    per_class = []
    for c in range(cm.n_classes):
        p = _ratio(tp[c], tp[c] + fp[c])
        r = _ratio(tp[c], tp[c] + fn[c])
        undefined = []
        if tp[c] + fp[c] == 0:
            undefined.append("precision")
        if tp[c] + fn[c] == 0:
            undefined.append("recall")
        if undefined:
            logger.warning(f"class {labels[c]}: {', '.join(undefined)} undefined, reported as 0")
        per_class.append(
            ClassMetrics(label=labels[c], precision=p, recall=r, f1=_f1(p, r), support=int(support[c]), undefined=undefined)
        )

    # single-label: pooled fp and fn both equal the off-diagonal mass, so micro P = R = F1 = accuracy
    accuracy = _ratio(tp.sum(), total)
    macro = PRF(
        precision=float(np.mean([m.precision for m in per_class])),
        recall=float(np.mean([m.recall for m in per_class])),
        f1=float(np.mean([m.f1 for m in per_class])),
    )
    weights = support / total

    def weighted_mean(values: List[float]) -> float:
        # rounding can land just above 1
        return min(1.0, float(np.dot(weights, values)))

    weighted = PRF(
        precision=weighted_mean([m.precision for m in per_class]),
        recall=weighted_mean([m.recall for m in per_class]),
        f1=weighted_mean([m.f1 for m in per_class]),
    )
    return MetricsReport(
        per_class=per_class,
        micro=PRF(precision=accuracy, recall=accuracy, f1=accuracy),
        macro=macro,
        weighted=weighted,
        accuracy=accuracy,
        total=total,
    )


def _pct(value: float) -> str:
    return f"{100.0 * value:.1f}"


def table_row(algorithm: str, features: str, report: MetricsReport, average: str = "weighted") -> List[str]:
    scores: PRF = getattr(report, average)
    return [algorithm, features, _pct(scores.precision), _pct(scores.recall), _pct(scores.f1)]


def format_table(rows: Sequence[Sequence[str]], title: Optional[str] = None) -> str:
    """Aligned 'Algorithms | Features | P | R | F1' table, numeric columns right-aligned."""
    header = ["Algorithms", "Features", "P", "R", "F1"]
    all_rows = [header] + [list(r) for r in rows]
    widths = [max(len(r[i]) for r in all_rows) for i in range(len(header))]
    lines = []
    if title:
        lines.append(title)
    for n, row in enumerate(all_rows):
        cells = [cell.ljust(w) if i < 2 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))]
        lines.append(" | ".join(cells))
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)
