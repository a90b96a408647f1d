"""Deterministic SVG renderers for analysis results.

Hand-rolled markup keeps the output byte-stable for a given input:
line charts for time series, one row per rank for interval timelines,
a heatmap for count matrices (grey = zero), and a min-max band with a
mean line for routine-fraction dispersion.
"""

from __future__ import annotations

from .analysis import CountMatrix, IntervalTimeline, RoutineStats, TimeSeries

PALETTE = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
    "#a65628", "#f781bf", "#17becf", "#bcbd22", "#8c564b",
]

GREY = "#c8c8c8"

WIDTH, HEIGHT = 900, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 45


def _doc(body: list[str], width: int = WIDTH, height: int = HEIGHT) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def _text(x: float, y: float, s: str, size: int = 11, anchor: str = "start") -> str:
    return (
        f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" '
        f'font-size="{size}" text-anchor="{anchor}">{_escape(s)}</text>'
    )


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _time_axis(body: list[str], t0_ns: int, t1_ns: int, y: float) -> None:
    body.append(
        f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{WIDTH - MARGIN_R}" y2="{y:.1f}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    span = t1_ns - t0_ns
    for i in range(5):
        t = t0_ns + span * i / 4
        x = MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) * i / 4
        body.append(_text(x, y + 16, f"{t / 1e9:.3f}s", anchor="middle"))


def color_for(code: int, codes: list[int]) -> str:
    return PALETTE[sorted(codes).index(code) % len(PALETTE)]


def _render_series(series: list[TimeSeries], title: str) -> str:
    body: list[str] = [_text(MARGIN_L, 18, title, size=13)]
    if not series or not series[0].values:
        return _doc(body)
    n = max(len(s.values) for s in series)
    vmax = max(max(s.values) for s in series) or 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    t0 = series[0].origin
    t1 = series[0].origin + n * series[0].bin_width
    for si, s in enumerate(series):
        points = []
        for i, v in enumerate(s.values):
            x = MARGIN_L + plot_w * (s.bin_start(i) + s.bin_width / 2 - t0) / (t1 - t0)
            y = MARGIN_T + plot_h * (1 - v / vmax)
            points.append(f"{x:.1f},{y:.1f}")
        color = PALETTE[si % len(PALETTE)]
        body.append(
            f'<polyline points="{" ".join(points)}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        body.append(_text(WIDTH - MARGIN_R - 120, MARGIN_T + 14 * (si + 1), s.label, size=10))
    body.append(_text(MARGIN_L - 8, MARGIN_T + 10, f"{vmax:.2f}", anchor="end"))
    body.append(_text(MARGIN_L - 8, MARGIN_T + plot_h, "0", anchor="end"))
    _time_axis(body, t0, t1, MARGIN_T + plot_h)
    units = series[0].units
    body.append(_text(12, MARGIN_T + plot_h / 2, units, size=10))
    return _doc(body)


def _render_timeline(timeline: IntervalTimeline, title: str) -> str:
    rows = sorted(timeline.rows)
    codes = timeline.codes()
    t1 = max((e for row in timeline.rows.values() for _, e, _, _ in row), default=1)
    row_h = max(6, min(24, (HEIGHT - MARGIN_T - MARGIN_B) // max(1, len(rows))))
    height = MARGIN_T + MARGIN_B + row_h * len(rows) + 16 * len(codes)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    body: list[str] = [_text(MARGIN_L, 18, title, size=13)]
    for ri, row in enumerate(rows):
        y = MARGIN_T + ri * row_h
        body.append(_text(MARGIN_L - 8, y + row_h * 0.7, f"{row[0]}.{row[1]}.{row[2]}", anchor="end", size=9))
        for b, e, code, _ in timeline.rows[row]:
            x0 = MARGIN_L + plot_w * b / t1
            w = max(plot_w * (e - b) / t1, 0.1)
            body.append(
                f'<rect x="{x0:.2f}" y="{y:.1f}" width="{w:.2f}" height="{row_h - 1}" '
                f'fill="{color_for(code, codes)}"/>'
            )
    axis_y = MARGIN_T + len(rows) * row_h + 4
    _time_axis(body, 0, t1, axis_y)
    for ci, code in enumerate(codes):
        label = next(
            (lab for row in timeline.rows.values() for _, _, c, lab in row if c == code),
            str(code),
        )
        y = axis_y + 24 + 16 * ci
        body.append(
            f'<rect x="{MARGIN_L}" y="{y - 9}" width="12" height="12" '
            f'fill="{color_for(code, codes)}"/>'
        )
        body.append(_text(MARGIN_L + 18, y + 1, label, size=10))
    return _doc(body, height=height + 10)


def _render_matrix(matrix: CountMatrix, title: str) -> str:
    n = len(matrix.labels)
    cell = max(6, min(36, (HEIGHT - MARGIN_T - MARGIN_B) // max(1, n)))
    vmax = int(matrix.counts.max()) or 1
    body: list[str] = [_text(MARGIN_L, 18, title, size=13)]
    for x in range(n):
        for y in range(n):
            count = int(matrix.counts[x, y])
            if count == 0:
                fill = GREY
            else:
                # green ramp, darker = more messages
                level = 0.25 + 0.75 * count / vmax
                g = int(90 + 100 * (1 - count / vmax))
                fill = f"rgb(0,{g + int(65 * level)},0)"
            body.append(
                f'<rect x="{MARGIN_L + y * cell}" y="{MARGIN_T + x * cell}" '
                f'width="{cell - 1}" height="{cell - 1}" fill="{fill}">'
                f"<title>{_escape(matrix.labels[x])} -&gt; {_escape(matrix.labels[y])}: {count}</title></rect>"
            )
    for i, label in enumerate(matrix.labels):
        body.append(_text(MARGIN_L - 6, MARGIN_T + i * cell + cell * 0.7, label, size=8, anchor="end"))
        body.append(
            f'<text x="{MARGIN_L + i * cell + cell * 0.5:.1f}" y="{MARGIN_T + n * cell + 10}" '
            f'font-family="sans-serif" font-size="8" text-anchor="end" '
            f'transform="rotate(-45 {MARGIN_L + i * cell + cell * 0.5:.1f} {MARGIN_T + n * cell + 10})">'
            f"{_escape(label)}</text>"
        )
    body.append(_text(MARGIN_L + n * cell + 16, MARGIN_T + 12, f"max = {vmax}", size=10))
    body.append(f'<rect x="{MARGIN_L + n * cell + 16}" y="{MARGIN_T + 20}" width="12" height="12" fill="{GREY}"/>')
    body.append(_text(MARGIN_L + n * cell + 34, MARGIN_T + 30, "no communication", size=10))
    return _doc(body, height=MARGIN_T + n * cell + 60)


def _render_stats(stats: RoutineStats, title: str) -> str:
    codes = sorted(stats.fractions)
    body: list[str] = [_text(MARGIN_L, 18, title, size=13)]
    if not codes:
        return _doc(body)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    vmax = max(stats.max(c) for c in codes) or 1.0
    step = plot_w / max(1, len(codes))

    def xy(i: int, v: float) -> tuple[float, float]:
        return MARGIN_L + step * (i + 0.5), MARGIN_T + plot_h * (1 - v / vmax)

    band = [xy(i, stats.max(c)) for i, c in enumerate(codes)]
    band += [xy(i, stats.min(c)) for i, c in reversed(list(enumerate(codes)))]
    body.append(
        '<polygon points="'
        + " ".join(f"{x:.1f},{y:.1f}" for x, y in band)
        + '" fill="#b0c4de" fill-opacity="0.6" stroke="none"/>'
    )
    mean_pts = [xy(i, stats.mean(c)) for i, c in enumerate(codes)]
    body.append(
        '<polyline points="'
        + " ".join(f"{x:.1f},{y:.1f}" for x, y in mean_pts)
        + '" fill="none" stroke="#d62728" stroke-width="2"/>'
    )
    for i, c in enumerate(codes):
        x, _ = xy(i, 0)
        body.append(_text(x, HEIGHT - MARGIN_B + 16, stats.labels[c], size=10, anchor="middle"))
        body.append(_text(x, HEIGHT - MARGIN_B + 30, f"mean {stats.mean(c):.3f}", size=9, anchor="middle"))
    body.append(_text(MARGIN_L - 8, MARGIN_T + 10, f"{vmax:.2f}", anchor="end"))
    body.append(_text(MARGIN_L - 8, MARGIN_T + plot_h, "0", anchor="end"))
    body.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{MARGIN_T + plot_h}" stroke="#000000" stroke-width="1"/>'
    )
    return _doc(body)


def export_svg(result, path: str, style: str | None = None) -> None:
    """Render an analysis result to an SVG file."""
    title = style or ""
    if isinstance(result, TimeSeries):
        text = _render_series([result], title or result.label)
    elif isinstance(result, list) and all(isinstance(s, TimeSeries) for s in result):
        text = _render_series(result, title or "bandwidth")
    elif isinstance(result, IntervalTimeline):
        text = _render_timeline(result, title or f"event type {result.event_type}")
    elif isinstance(result, CountMatrix):
        text = _render_matrix(result, title or "messages sent")
    elif isinstance(result, RoutineStats):
        text = _render_stats(result, title or "routine time fractions")
    else:
        raise TypeError(f"cannot render {type(result).__name__} as SVG")
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(text)
