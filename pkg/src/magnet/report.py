"""Plain-text table and SVG bar chart for benchmark CSV rows."""

from __future__ import annotations

from xml.sax.saxutils import escape

_COLUMNS = ["setting", "n", "nodes", "important", "method", "metric", "mean", "sd", "repeats"]


def text_table(rows):
    cells = [_COLUMNS] + [
        [f"{r[c]:.3f}" if c in ("mean", "sd") else str(r[c]) for c in _COLUMNS] for r in rows
    ]
    widths = [max(len(row[k]) for row in cells) for k in range(len(_COLUMNS))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def svg_bar_chart(rows, title="MaGNet benchmark"):
    """One bar per row (mean) with a +-sd whisker; values are expected in [0, 1]."""
    bar_w, gap, left, top, height = 36, 18, 60, 40, 240
    width = left + len(rows) * (bar_w + gap) + gap
    total_h = top + height + 110
    top_val = max([1.0] + [r["mean"] + r["sd"] for r in rows])

    def y(v):
        return top + height * (1.0 - max(v, 0.0) / top_val)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
        f'viewBox="0 0 {width} {total_h}" font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="20" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + height}" x2="{width - gap}" y2="{top + height}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + height}" stroke="black"/>',
    ]
    for tick in range(0, 11, 2):
        v = top_val * tick / 10
        parts.append(
            f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>'
        )
    for k, r in enumerate(rows):
        x = left + gap + k * (bar_w + gap)
        y0 = y(r["mean"])
        parts.append(
            f'<rect x="{x}" y="{y0:.1f}" width="{bar_w}" height="{top + height - y0:.1f}" fill="#4c72b0"/>'
        )
        cx = x + bar_w / 2
        lo, hi = y(r["mean"] - r["sd"]), y(r["mean"] + r["sd"])
        parts.append(f'<line x1="{cx}" y1="{lo:.1f}" x2="{cx}" y2="{hi:.1f}" stroke="black"/>')
        parts.append(f'<text x="{cx}" y="{y0 - 4:.1f}" text-anchor="middle">{r["mean"]:.3f}</text>')
        label = escape(f"S{r['setting']} {r['method']} {r['metric']}")
        parts.append(
            f'<text transform="translate({cx},{top + height + 10}) rotate(60)">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
