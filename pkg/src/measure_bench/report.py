"""SVG renderings of the analysis outputs.

Emitters only lay out numbers that already exist in the CSV exports. Each file
carries those numbers, formatted exactly as in the CSVs, in its description
metadata so that plots can be checked against the tables.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from .measures import MEASURES
from .regression import (DECREASING, INCREASING, SEGMENT_TERMS, TREND_PARAMETERS,
                         ImportanceTable, RegressionModel, significance_rows)
from .sweep import format_real
from .transforms import KIND_NAMES, KINDS
from .typology import TypologyResult


class ReportError(ValueError):
    pass


_RC = {
    "svg.hashsalt": "measure-bench",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "path.simplify": False,
}
SEGMENT_COLORS = dict(zip(SEGMENT_TERMS, matplotlib.colormaps["tab10"].colors))
CLUSTER_COLORS = matplotlib.colormaps["Set2"].colors + matplotlib.colormaps["Pastel1"].colors


def _save(fig: Figure, path, description: str) -> Path:
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={
            "Date": None, "Creator": "measure-bench", "Description": description})
    return path


def _figure(width: float, height: float) -> Figure:
    with matplotlib.rc_context(_RC):
        return Figure(figsize=(width, height))


def emit_importance_bars(table: ImportanceTable, path, terms=SEGMENT_TERMS) -> Path:
    """Stacked bars of square-rooted importance, one panel per measure and one bar
    per transformation, with trend triangles over main-effect segments."""
    missing = [(m, t) for m in MEASURES for t in KINDS if (t, m) not in table.cells]
    if missing:
        raise ReportError("importance table incomplete; missing " + ", ".join(f"{m}/{t}" for m, t in missing))
    fig = _figure(11, 6.5)
    axes = fig.subplots(2, 3, sharey=True).ravel()
    lines = ["measure,transform,term,importance_sqrt"]
    for ax, m in zip(axes, MEASURES):
        for x, t in enumerate(KINDS):
            values = table.cell(m, t, "importance_sqrt")
            bottom = 0.0
            for term in terms:
                h = values[term]
                bar = Rectangle((x - 0.35, bottom), 0.7, h, facecolor=SEGMENT_COLORS[term], edgecolor="white", lw=0.3)
                bar.set_gid(f"bar-{m}-{t}-{term}")
                ax.add_patch(bar)
                flag = table.trends.get((m, t, term))
                if term in TREND_PARAMETERS and flag in (INCREASING, DECREASING):
                    ax.plot([x + 0.42], [bottom + h / 2], marker="^" if flag == INCREASING else "v",
                            color="black", markersize=4, gid=f"trend-{m}-{t}-{term}")
                bottom += h
                lines.append(f"{m},{t},{term},{format_real(h)}")
        ax.set_xlim(-0.6, len(KINDS) - 0.4)
        ax.set_xticks(range(len(KINDS)), [KIND_NAMES[t].replace(" ", "\n", 1) for t in KINDS], fontsize=6)
        ax.set_title(f"$D_{{{m}}}$")
        ax.autoscale(axis="y")
    axes[0].set_ylabel("relative importance (square root)")
    axes[3].set_ylabel("relative importance (square root)")
    handles = [Rectangle((0, 0), 1, 1, color=SEGMENT_COLORS[t]) for t in terms]
    fig.legend(handles, terms, loc="lower center", ncol=len(terms), frameon=False)
    fig.subplots_adjust(bottom=0.14, hspace=0.35)
    return _save(fig, path, "\n".join(lines))


def emit_score_lines(records, measures, transform: str, x_param: str, fixed: dict, path,
                     line_param: str | None = None) -> Path:
    """Score against one parameter, one line per measure, or per value of
    ``line_param`` when it is given (then exactly one measure is expected)."""
    measures = tuple(measures)
    if not measures:
        raise ReportError("no measures requested")
    if x_param not in TREND_PARAMETERS:
        raise ReportError(f"unknown x parameter {x_param!r}")
    if line_param is not None and len(measures) != 1:
        raise ReportError("lines per parameter value need exactly one measure")
    free = {x_param} | ({line_param} if line_param else set())
    pinned = [p for p in TREND_PARAMETERS if p not in free]
    unpinned = [p for p in pinned if p not in fixed]
    if unpinned:
        raise ReportError("fixed values missing for " + ", ".join(unpinned))

    relevant = [r for r in records if r.transform == transform]
    x_values = sorted({getattr(r, x_param) for r in relevant})
    line_values = sorted({getattr(r, line_param) for r in relevant}) if line_param else [None]
    table = {}
    for r in relevant:
        if r.measure in measures and all(abs(getattr(r, p) - float(fixed[p])) < 1e-9 for p in pinned):
            table[(r.measure, getattr(r, line_param) if line_param else None, getattr(r, x_param))] = r.y

    absent = [(m, lv, xv) for m in measures for lv in line_values for xv in x_values if (m, lv, xv) not in table]
    if absent or not x_values:
        shown = ", ".join(f"{m}/{line_param}={lv}/{x_param}={xv}" if line_param else f"{m}/{x_param}={xv}"
                          for m, lv, xv in absent[:20])
        raise ReportError(f"missing grid points: {shown or 'no data for ' + transform}")

    fig = _figure(5, 3.8)
    ax = fig.subplots()
    lines = [f"series,{x_param},y"]
    for m in measures:
        for lv in line_values:
            ys = [table[(m, lv, xv)] for xv in x_values]
            label = f"{line_param}={format_real(lv)}" if line_param else f"$D_{{{m}}}$"
            ax.plot(x_values, ys, marker="o", markersize=3, lw=1, label=label, gid=f"line-{m}-{lv}")
            lines.extend(f"{label},{format_real(xv)},{format_real(y)}" for xv, y in zip(x_values, ys))
    ax.set_xlabel(x_param)
    ax.set_ylabel("dissimilarity" if not line_param else f"$D_{{{measures[0]}}}$")
    pins = ", ".join(f"{p}={format_real(float(fixed[p]))}" for p in pinned)
    ax.set_title(f"{KIND_NAMES[transform]} ({pins})", fontsize=8)
    ax.legend(fontsize=6, frameon=False)
    fig.tight_layout()
    return _save(fig, path, "\n".join(lines))


def emit_significance_matrices(model_or_rows, path, alpha: float = 0.05) -> Path:
    """Grids of pairwise significance: green when the two coefficients differ at
    level ``alpha``, red otherwise."""
    rows = significance_rows(model_or_rows, alpha) if isinstance(model_or_rows, RegressionModel) else model_or_rows
    groups = defaultdict(dict)
    for family, key, term, a, b, p, sig in rows:
        groups[(family, key, term)][(a, b)] = (p, sig)
    panels = sorted({(f, k) for f, k, _ in groups},
                    key=lambda fk: (fk[0] != "transformations",
                                    (MEASURES + KINDS).index(fk[1]) if fk[1] in MEASURES + KINDS else 99))
    terms = [t for t in SEGMENT_TERMS if any(g[2] == t for g in groups)]
    if not panels or not terms:
        raise ReportError("no significance results to draw")
    fig = _figure(1.1 * len(terms) + 1, 1.1 * len(panels) + 0.5)
    axes = fig.subplots(len(panels), len(terms), squeeze=False)
    lines = ["family,fixed_key,param_set,item_a,item_b,significant"]
    for i, (family, key) in enumerate(panels):
        for j, term in enumerate(terms):
            ax = axes[i][j]
            cells = groups.get((family, key, term), {})
            items = [x for x in (KINDS if family == "transformations" else MEASURES)
                     if any(x == a for a, _ in cells)]
            for r, a in enumerate(items):
                for c, b in enumerate(items):
                    sig = cells[(a, b)][1]
                    ax.add_patch(Rectangle((c, len(items) - 1 - r), 1, 1, edgecolor="white", lw=0.5,
                                           facecolor="#2ca02c" if sig else "#d62728"))
                    lines.append(f"{family},{key},{term},{a},{b},{'true' if sig else 'false'}")
            ax.set_xlim(0, len(items))
            ax.set_ylim(0, len(items))
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0:
                ax.set_title(term, fontsize=7)
            if j == 0:
                ax.set_ylabel(key, fontsize=7)
    return _save(fig, path, "\n".join(lines))


def emit_typology_table(result: TypologyResult, path, k: int | None = None) -> Path:
    """Measures by transformations, each cell colored by its cluster."""
    k = result.chosen_k if k is None else k
    grid = result.grid(k)
    measures = [m for m in MEASURES if any(key[0] == m for key in grid)]
    transforms = [t for t in KINDS if any(key[1] == t for key in grid)]
    fig = _figure(1.3 * len(transforms) + 1, 0.4 * len(measures) + 1)
    ax = fig.subplots()
    lines = ["measure,transform,cluster_id"]
    for r, m in enumerate(measures):
        for c, t in enumerate(transforms):
            cid = grid[(m, t)]
            ax.add_patch(Rectangle((c, len(measures) - 1 - r), 1, 1, edgecolor="white",
                                   facecolor=CLUSTER_COLORS[cid % len(CLUSTER_COLORS)], gid=f"cell-{m}-{t}"))
            ax.text(c + 0.5, len(measures) - 0.5 - r, str(cid), ha="center", va="center")
            lines.append(f"{m},{t},{cid}")
    ax.set_xlim(0, len(transforms))
    ax.set_ylim(0, len(measures))
    ax.set_xticks([c + 0.5 for c in range(len(transforms))], [KIND_NAMES[t] for t in transforms], fontsize=6)
    ax.set_yticks([len(measures) - 0.5 - r for r in range(len(measures))], [f"$D_{{{m}}}$" for m in measures])
    ax.set_title(f"k = {k}, silhouette {result.silhouettes[k]:.3f}", fontsize=8)
    fig.tight_layout()
    return _save(fig, path, "\n".join(lines))
