from pathlib import Path
from typing import Optional, Sequence

import matplotlib.pyplot as plt
import pandas as pd

from internal.domain.evaluation.judgment import MetricReport

TABLE_KS = (3, 5, 10)
MISSING = "n/a"


def metric_table(report: MetricReport, ks: Sequence[int] = TABLE_KS) -> pd.DataFrame:
    """Rows = strategies, columns = P@k then mAP@k, values in percent."""
    rows = {}
    for metrics in report.strategies:
        row = {}
        for k in ks:
            row[f"P@{k}"] = metrics.precision.get(k)
        for k in ks:
            row[f"mAP@{k}"] = metrics.mean_ap.get(k)
        rows[metrics.strategy.display_name] = row
    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "Method"
    return frame.astype(float) * 100.0


def render_table(report: MetricReport, ks: Sequence[int] = TABLE_KS) -> str:
    frame = metric_table(report, ks)
    text = frame.to_string(
        float_format=lambda v: f"{v:.2f}%", na_rep=MISSING, justify="right"
    )
    notes = "\n".join(f"  - {note}" for note in report.notes)
    return f"{text}\n\nQueries: {report.query_count}\nNotes:\n{notes}\n"


def per_query_table(report: MetricReport) -> pd.DataFrame:
    """AP@k per (strategy, query) in long form."""
    records = [
        {"strategy": m.strategy.value, "query_id": qid, "k": k, "ap": ap}
        for m in report.strategies
        for qid, aps in m.per_query_ap.items()
        for k, ap in aps.items()
    ]
    return pd.DataFrame.from_records(
        records, columns=["strategy", "query_id", "k", "ap"]
    )


def plot_report(
    report: MetricReport, path: Path, title: Optional[str] = None
) -> Path:
    """P@k and mAP@k against k, one line per strategy."""
    fig, (ax_p, ax_map) = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    ks = list(report.k_set)
    for metrics in report.strategies:
        label = metrics.strategy.display_name
        precision = [_percent(metrics.precision.get(k)) for k in ks]
        mean_ap = [_percent(metrics.mean_ap.get(k)) for k in ks]
        ax_p.plot(ks, precision, "o-", label=label)
        ax_map.plot(ks, mean_ap, "o-", label=label)
    ax_p.set_title("Precision@K")
    ax_map.set_title("mAP@K")
    for ax in (ax_p, ax_map):
        ax.set_xlabel("K")
        ax.set_xticks(ks)
        ax.grid(alpha=0.3)
    ax_p.set_ylabel("%")
    ax_map.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _percent(value: Optional[float]) -> float:
    return float("nan") if value is None else value * 100.0
