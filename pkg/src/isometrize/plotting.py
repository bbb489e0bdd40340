"""Figures for report tables (display only, written to files)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402


def table_series(table) -> dict:
    """Group ``[N, item, value]`` rows into ``item -> (Ns, values)``."""
    out = defaultdict(lambda: ([], []))
    for n, item, value in table:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or n in ("", None):
            continue
        xs, ys = out[item]
        xs.append(n)
        ys.append(value)
    return dict(out)


def plot_report(report, path, title: str | None = None):
    """Plot each numeric table item against N on log-log axes; return the path."""
    series = table_series(report.table)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    positive = True
    for item, (xs, ys) in sorted(series.items()):
        ax.plot(xs, ys, "o-", lw=1.5, ms=3, label=item)
        positive = positive and all(y > 0 for y in ys)
    ax.set_xscale("log", base=2)
    if positive and series:
        ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("value")
    ax.set_title(title or f"{report.command}: {report.status}")
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend(fontsize=7, ncol=2 if len(series) > 6 else 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
