"""Regression result records and their CSV / markdown renderings.

Layout follows the usual journal convention: coefficient with significance
stars, p-value in parentheses underneath, observation and group counts in the
footer rows.  Stars: *** p<0.01, ** p<0.05, * p<0.1.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def stars(p_value):
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


@dataclass(frozen=True)
class RegressionRow:
    label: str
    estimate: float
    se: float | None = None
    t_stat: float | None = None
    p_value: float | None = None

    @property
    def star(self):
        return "" if self.p_value is None else stars(self.p_value)


@dataclass(frozen=True)
class RegressionTable:
    """One estimated model: coefficient rows plus fit diagnostics."""

    name: str
    rows: tuple
    n_obs: int
    r_squared: float
    df_resid: int
    se_type: str
    n_groups: int = 0  # absorbed fixed-effect groups
    n_entities: int = 0  # distinct stocks in the sample
    n_dropped: int = 0  # rows lost to missing regressors for this model
    notes: tuple = field(default_factory=tuple)

    def row(self, label):
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(f"no row labelled {label!r} in table {self.name!r}")

    def has_row(self, label):
        return any(row.label == label for row in self.rows)

    def csv_records(self):
        for row in self.rows:
            yield {
                "model": self.name,
                "label": row.label,
                "estimate": row.estimate,
                "se": row.se,
                "t_stat": row.t_stat,
                "p_value": row.p_value,
                "stars": row.star,
                "n_obs": self.n_obs,
                "n_entities": self.n_entities,
                "r_squared": self.r_squared,
                "se_type": self.se_type,
            }

    def to_markdown(self):
        lines = [f"### {self.name}", "", "| variable | estimate | (pval) |", "|---|---|---|"]
        for row in self.rows:
            if row.p_value is None:
                lines.append(f"| {row.label} | {row.estimate:.4f} | |")
            else:
                lines.append(
                    f"| {row.label} | {row.estimate:.4f}{row.star} | ({row.p_value:.4f}) |"
                )
        lines.append(f"| Observations | {self.n_obs:,} | |")
        if self.n_entities:
            lines.append(f"| Number of stocks | {self.n_entities:,} | |")
        lines.append(f"| R-squared (within) | {self.r_squared:.4f} | |")
        lines.append(f"| Industry effect | {'YES' if self.n_groups else 'NO'} | |")
        if self.n_dropped:
            lines.append(f"| Rows dropped (missing) | {self.n_dropped:,} | |")
        for note in self.notes:
            lines.append(f"| note | {note} | |")
        lines.append("")
        return "\n".join(lines)


def render_report(title, tables):
    """Markdown document for a list of tables, with the shared footer."""
    parts = [f"# {title}", ""]
    for table in tables:
        parts.append(table.to_markdown())
    parts.append("pval in parentheses")
    parts.append("")
    parts.append("*** p<0.01, ** p<0.05, * p<0.1")
    parts.append("")
    return "\n".join(parts)


def write_results_csv(path, tables):
    """Flat CSV dump of many tables, one coefficient per row."""
    import csv

    columns = [
        "model",
        "label",
        "estimate",
        "se",
        "t_stat",
        "p_value",
        "stars",
        "n_obs",
        "n_entities",
        "r_squared",
        "se_type",
    ]

    def _fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for table in tables:
            for record in table.csv_records():
                writer.writerow([_fmt(record[c]) for c in columns])
