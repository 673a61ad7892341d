"""Box-plot rendering (hand-rolled SVG) and the markdown run report."""

from __future__ import annotations

import math
from pathlib import Path

# Panel layout mirrors the published comparison figure: the systemic
# resistance pair, the pulmonary resistance pair, then exercise+posture.
PANELS = [
    ("rsa", ["rsa-up", "rsa-down"]),
    ("rpa", ["rpa-up", "rpa-down"]),
    ("exercise_posture", ["exercise", "posture"]),
]

_COLORS = {"mfac": "#c0392b", "pid": "#2980b9"}

_W, _H = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 80, 20, 40, 70


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(t)
        t += step
    return out


def render_boxplot_svg(box_rows: list, scenarios: list, title: str) -> str:
    """One SVG panel comparing both controllers across the given scenarios."""
    rows = [r for r in box_rows if r["scenario"] in scenarios]
    if not rows:
        raise ValueError("no box data for requested scenarios")
    values = []
    for r in rows:
        values += [r["whisker_low"], r["whisker_high"]] + list(r["outliers"])
    lo, hi = 0.0, max(values) * 1.08
    plot_w = _W - _MARGIN_L - _MARGIN_R
    plot_h = _H - _MARGIN_T - _MARGIN_B

    def sy(v):
        return _MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo))

    n_groups = len(scenarios)
    group_w = plot_w / n_groups
    box_w = min(60.0, group_w / 3.2)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    for tick in _ticks(lo, hi):
        y = sy(tick)
        parts.append(f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" x2="{_W - _MARGIN_R}" '
                     f'y2="{_fmt(y)}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{_fmt(tick)}</text>')
    parts.append(f'<text x="16" y="{_MARGIN_T + plot_h / 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2})">SAE (mmHg)</text>')

    for gi, scenario in enumerate(scenarios):
        cx_group = _MARGIN_L + group_w * (gi + 0.5)
        parts.append(f'<text x="{_fmt(cx_group)}" y="{_H - 40}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{scenario}</text>')
        for ci, kind in enumerate(("mfac", "pid")):
            row = next((r for r in rows
                        if r["scenario"] == scenario and r["controller"] == kind),
                       None)
            if row is None:
                continue
            color = _COLORS[kind]
            cx = cx_group + (ci - 0.5) * (box_w + 14)
            x0, x1 = cx - box_w / 2, cx + box_w / 2
            yq1, yq3 = sy(row["q1"]), sy(row["q3"])
            ymed = sy(row["median"])
            ylo, yhi = sy(row["whisker_low"]), sy(row["whisker_high"])
            parts += [
                f'<line x1="{_fmt(cx)}" y1="{_fmt(ylo)}" x2="{_fmt(cx)}" y2="{_fmt(yq1)}" stroke="{color}"/>',
                f'<line x1="{_fmt(cx)}" y1="{_fmt(yq3)}" x2="{_fmt(cx)}" y2="{_fmt(yhi)}" stroke="{color}"/>',
                f'<line x1="{_fmt(cx - box_w / 4)}" y1="{_fmt(ylo)}" x2="{_fmt(cx + box_w / 4)}" y2="{_fmt(ylo)}" stroke="{color}"/>',
                f'<line x1="{_fmt(cx - box_w / 4)}" y1="{_fmt(yhi)}" x2="{_fmt(cx + box_w / 4)}" y2="{_fmt(yhi)}" stroke="{color}"/>',
                f'<rect x="{_fmt(x0)}" y="{_fmt(yq3)}" width="{_fmt(box_w)}" '
                f'height="{_fmt(max(yq1 - yq3, 0.5))}" fill="{color}" fill-opacity="0.25" stroke="{color}"/>',
                f'<line x1="{_fmt(x0)}" y1="{_fmt(ymed)}" x2="{_fmt(x1)}" y2="{_fmt(ymed)}" '
                f'stroke="{color}" stroke-width="2"/>',
            ]
            for v in row["outliers"]:
                yv = sy(v)
                parts += [
                    f'<line x1="{_fmt(cx - 4)}" y1="{_fmt(yv - 4)}" x2="{_fmt(cx + 4)}" y2="{_fmt(yv + 4)}" stroke="{color}"/>',
                    f'<line x1="{_fmt(cx - 4)}" y1="{_fmt(yv + 4)}" x2="{_fmt(cx + 4)}" y2="{_fmt(yv - 4)}" stroke="{color}"/>',
                ]
    legend_y = _H - 16
    parts += [
        f'<rect x="{_MARGIN_L}" y="{legend_y - 10}" width="14" height="10" fill="{_COLORS["mfac"]}" fill-opacity="0.25" stroke="{_COLORS["mfac"]}"/>',
        f'<text x="{_MARGIN_L + 20}" y="{legend_y}" font-family="sans-serif" font-size="12">MFAC</text>',
        f'<rect x="{_MARGIN_L + 80}" y="{legend_y - 10}" width="14" height="10" fill="{_COLORS["pid"]}" fill-opacity="0.25" stroke="{_COLORS["pid"]}"/>',
        f'<text x="{_MARGIN_L + 100}" y="{legend_y}" font-family="sans-serif" font-size="12">PID</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def write_report(outdir, summary_rows: list, box_rows: list) -> list:
    """Render the three panels and a markdown summary; returns paths written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    present = {r["scenario"] for r in box_rows}
    for name, scenarios in PANELS:
        wanted = [s for s in scenarios if s in present]
        if not wanted:
            continue
        svg = render_boxplot_svg(box_rows, wanted,
                                 title="Tracking error by controller: " + ", ".join(wanted))
        path = outdir / f"boxplot_{name}.svg"
        path.write_text(svg, encoding="utf-8", newline="\n")
        written.append(path)

    lines = ["# Controller comparison report", "",
             "| scenario | controller | n | SAE mean | SAE std | median | "
             "congestion runs | suction runs | Wilcoxon p |",
             "|---|---|---|---|---|---|---|---|---|"]
    for row in summary_rows:
        if row.get("absent"):
            lines.append(f"| {row['scenario']} | {row['controller']} | 0 | "
                         "absent | | | | | |")
            continue
        lines.append(
            f"| {row['scenario']} | {row['controller']} | {row['n']} | "
            f"{row['sae_mean']:.1f} | {row['sae_std']:.1f} | "
            f"{row['sae_median']:.1f} | {row['congestion_runs']} | "
            f"{row['suction_runs']} | {row['wilcoxon_p']:.3g} |")
    lines += ["", "Whiskers follow the 1.5 IQR convention; crosses are "
              "outliers. Lower SAE means tighter tracking of the filling-"
              "pressure setpoint.", ""]
    md = outdir / "report.md"
    md.write_text("\n".join(lines), encoding="utf-8", newline="\n")
    written.append(md)
    return written
