from typing import Sequence

from app.schemas.reports import AblationReport, CaptionReport, VqaReport


def format_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Left-aligned plain-text table; floats get four decimals."""
    cells = [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row] for row in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in cells)) for i, h in enumerate(headers)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells)
    return "\n".join(lines) + "\n"


def report_table(report) -> str:
    if isinstance(report, CaptionReport):
        rows = [(name, getattr(report, name)) for name in ("bleu_1", "bleu_2", "bleu_3", "bleu_4", "cider", "exact_match")]
        rows.append(("samples", report.samples))
        return format_table(("metric", "value"), rows)
    if isinstance(report, VqaReport):
        rows = [("accuracy", report.accuracy, report.questions)]
        rows.extend((f"accuracy[{t}]", v.accuracy, v.count) for t, v in report.per_type.items())
        rows.append(("wups@0.9", report.wups_0_9, report.questions))
        rows.append(("wups@0.0", report.wups_0_0, report.questions))
        return format_table(("metric", "value", "count"), rows)
    if isinstance(report, AblationReport):
        names = sorted({k for row in report.rows for k in row.metrics})
        return format_table(("variant", *names), [(row.variant, *(row.metrics.get(n, float("nan")) for n in names)) for row in report.rows])
    raise TypeError(f"no table layout for {type(report).__name__}")
