"""Optional log-log rate figure for a finished study."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["rate_plot"]


def rate_plot(report, path) -> None:
    """Mean excess risk against ``n`` per method, with the ``beta log M / n`` bound.

    Cells with a nonpositive mean cannot sit on a log axis and are skipped.
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for method in report.methods:
        cells = [c for c in report.cells if c["method"] == method and c["mean_excess"] > 0]
        if cells:
            ax.errorbar([c["n"] for c in cells], [c["mean_excess"] for c in cells],
                        yerr=[c["stderr"] for c in cells], marker="o", capsize=3, label=method)
    bound = {c["n"]: c["bound_total"] for c in report.cells}
    ns = sorted(bound)
    ax.plot(ns, [bound[n] for n in ns], "k--", label="bound")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("mean excess risk")
    ax.set_title(report.scenario.get("kind", ""))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, format="png")
    plt.close(fig)
