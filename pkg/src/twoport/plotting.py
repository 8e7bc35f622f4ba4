"""Deterministic SVG rendering for experiment result tables.

Figures are line charts driven entirely by a ResultTable and its PlotSpec:
one polyline per (series group, y column) pair, log-scaled x axis when every
x value is positive. Rendering is pinned to the Agg backend with a fixed
``svg.hashsalt`` and no embedded date, so identical tables produce
byte-identical SVG files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_FIGSIZE = (7.0, 4.5)
_DPI = 100


def _series_groups(table):
    """Rows split by the group_by column values, first-appearance order."""
    spec = table.plot
    if not spec.group_by:
        return [((), list(table.rows))]
    indices = [table.column_names.index(c) for c in spec.group_by]
    groups: dict = {}
    for row in table.rows:
        key = tuple(row[i] for i in indices)
        groups.setdefault(key, []).append(row)
    return list(groups.items())


def _format_group(names, values) -> str:
    return ", ".join(f"{n}={v:g}" for n, v in zip(names, values))


def render_table(table, path) -> None:
    """Render the table's PlotSpec to an SVG file at ``path``."""
    spec = table.plot
    x_index = table.column_names.index(spec.x)
    y_indices = [(name, table.column_names.index(name)) for name in spec.ys]

    with plt.rc_context({"svg.hashsalt": "twoport"}):
        fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
        try:
            all_x = []
            for key, rows in _series_groups(table):
                xs = [row[x_index] for row in rows]
                all_x.extend(xs)
                prefix = _format_group(spec.group_by, key)
                for name, idx in y_indices:
                    label = f"{name} [{prefix}]" if prefix else name
                    ax.plot(xs, [row[idx] for row in rows],
                            marker="o", markersize=3, linewidth=1.2,
                            label=label)
            if all_x and min(all_x) > 0 and max(all_x) / min(all_x) >= 30:
                ax.set_xscale("log")
            ax.set_xlabel(spec.x)
            ax.set_ylabel(", ".join(spec.ys) if len(spec.ys) <= 2 else "value")
            ax.set_title(table.experiment)
            ax.grid(True, alpha=0.3)
            if table.rows:
                ax.legend(fontsize=7, loc="best")
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
