"""Minimal SVG bar charts for probability-mass distributions."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .metrics import PMD


def bar_chart_svg(values: dict[str, float], title: str, width: int = 640, height: int = 240,
                  ymax: float | None = None) -> str:
    pad_l, pad_r, pad_t, pad_b = 40, 10, 24, 20
    plot_w, plot_h = width - pad_l - pad_r, height - pad_t - pad_b
    n = max(len(values), 1)
    top = ymax if ymax is not None else max(values.values(), default=0.0) or 1.0
    bar_w = plot_w / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + plot_h}" x2="{pad_l + plot_w}" y2="{pad_t + plot_h}" stroke="#000"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + plot_h}" stroke="#000"/>',
        f'<text x="{pad_l - 4}" y="{pad_t + 4}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">{top:.3f}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + plot_h}" text-anchor="end" font-size="10" '
        f'font-family="sans-serif">0</text>',
    ]
    for k, (name, v) in enumerate(values.items()):
        h = plot_h * (v / top) if top else 0.0
        x = pad_l + k * bar_w
        parts.append(f'<rect x="{x + 0.1 * bar_w:.2f}" y="{pad_t + plot_h - h:.2f}" width="{0.8 * bar_w:.2f}" '
                     f'height="{h:.2f}" fill="#4a78b5"><title>{escape(name)}: {v:.4f}</title></rect>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def pmd_svgs(dist: PMD, label: str = "") -> dict[str, str]:
    """One chart for the macro PMD and one per role, sharing the concept order and y-scale."""
    ymax = max([*dist.macro.values(), *(v for d in dist.per_role.values() for v in d.values())], default=1.0)
    prefix = f"{label} " if label else ""
    out = {"macro": bar_chart_svg(dist.macro, f"{prefix}macro PMD", ymax=ymax)}
    for role, d in dist.per_role.items():
        out[role] = bar_chart_svg(d, f"{prefix}PMD at {role}", ymax=ymax)
    return out
