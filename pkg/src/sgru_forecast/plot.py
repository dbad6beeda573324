"""Static SVG chart of a forecast: history, mean forecast, optional actuals and a quantile band."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ContractError

SVG_NS = "http://www.w3.org/2000/svg"
COLORS = {"history": "#333333", "mean": "#1f77b4", "actual": "#d62728", "band": "#1f77b4"}
MARGIN = 40


def _points(coords: Iterable[Tuple[float, float]]) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)


def render_forecast_svg(
    path: Union[str, Path],
    history: Sequence[float],
    mean: Sequence[float],
    lower: Optional[Sequence[float]] = None,
    upper: Optional[Sequence[float]] = None,
    actual: Optional[Sequence[float]] = None,
    title: str = "",
    width: int = 800,
    height: int = 400,
) -> Path:
    """Write an SVG line chart.

    History occupies steps -len(history)+1 .. 0 and the forecast steps 1 .. tau.
    Each series is one ``<polyline>``; the band between ``lower`` and ``upper``
    is one ``<polygon>``.

    Raises:
        ContractError: If the forecast is empty or series lengths disagree
    """
    history = np.asarray(history, dtype=np.float64).reshape(-1)
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    horizon = len(mean)
    if horizon == 0:
        raise ContractError("Nothing to plot: the forecast is empty")
    series = [s for s in (lower, upper, actual) if s is not None]
    if any(len(s) != horizon for s in series):
        raise ContractError("Band and actual series must match the forecast length")

    values = np.concatenate([history, mean] + [np.asarray(s, dtype=np.float64) for s in series])
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    first = -len(history) + 1
    span = max(horizon - first, 1)

    def sx(step: float) -> float:
        return MARGIN + (step - first) / span * (width - 2 * MARGIN)

    def sy(value: float) -> float:
        return height - MARGIN - (value - lo) / (hi - lo) * (height - 2 * MARGIN)

    steps = np.arange(1, horizon + 1)
    svg = ET.Element(
        "svg",
        {"xmlns": SVG_NS, "width": str(width), "height": str(height), "viewBox": f"0 0 {width} {height}"},
    )
    if title:
        heading = ET.SubElement(svg, "text", {"x": str(MARGIN), "y": str(MARGIN // 2), "font-size": "14"})
        heading.text = title
    ET.SubElement(
        svg,
        "line",
        {"x1": f"{sx(0.5):.2f}", "y1": str(MARGIN), "x2": f"{sx(0.5):.2f}", "y2": str(height - MARGIN),
         "stroke": "#999999", "stroke-dasharray": "4 4"},
    )

    if lower is not None and upper is not None:
        outline: List[Tuple[float, float]] = [(sx(s), sy(v)) for s, v in zip(steps, upper)]
        outline += [(sx(s), sy(v)) for s, v in zip(steps[::-1], np.asarray(lower)[::-1])]
        ET.SubElement(
            svg,
            "polygon",
            {"class": "band", "points": _points(outline), "fill": COLORS["band"], "fill-opacity": "0.2", "stroke": "none"},
        )

    lines = []
    if len(history):
        lines.append(("history", np.arange(first, 1), history))
    lines.append(("mean", steps, mean))
    if actual is not None:
        lines.append(("actual", steps, np.asarray(actual, dtype=np.float64)))
    for name, xs, ys in lines:
        ET.SubElement(
            svg,
            "polyline",
            {"class": name, "points": _points((sx(x), sy(y)) for x, y in zip(xs, ys)),
             "fill": "none", "stroke": COLORS[name], "stroke-width": "1.5"},
        )

    path = Path(path)
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
    return path
