"""View models for the SVG figures. Geometry is computed here; templates only place shapes."""

from typing import Any

import numpy as np
from pydantic import BaseModel

from app.internal.explain.aggregate import GlobalContribution, Waterfall

HC_COLOR = "#3b75af"
PD_COLOR = "#c03d3e"
PLOT_WIDTH = 420.0
ROW_HEIGHT = 24.0
LABEL_WIDTH = 150.0
MARGIN = 20.0


def _shade(fraction: float) -> str:
    """White to dark blue."""
    low = np.array([255, 255, 255])
    high = np.array([31, 78, 121])
    r, g, b = np.rint(low + (high - low) * min(max(fraction, 0.0), 1.0)).astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


class HeatCell(BaseModel):
    x: float
    y: float
    fill: str
    text: str
    count: int
    dark: bool


def confusion_view(title: str, normalized: np.ndarray, counts: np.ndarray) -> dict[str, Any]:  # pyright: ignore[reportExplicitAny]
    size = 120.0
    cells = [
        HeatCell(
            x=LABEL_WIDTH / 2 + col * size,
            y=60.0 + row * size,
            fill=_shade(float(normalized[row, col])),
            text=f"{normalized[row, col]:.2f}",
            count=int(counts[row, col]),
            dark=float(normalized[row, col]) > 0.5,
        )
        for row in range(2)
        for col in range(2)
    ]
    return {
        "title": title,
        "cells": cells,
        "size": size,
        "labels": ["HC", "PD"],
        "left": LABEL_WIDTH / 2,
        "top": 60.0,
        "width": LABEL_WIDTH / 2 + 2 * size + MARGIN * 2,
        "height": 60.0 + 2 * size + 50.0,
    }


class StackedBar(BaseModel):
    label: str
    y: float
    hc_width: float
    pd_width: float
    total: float


def stacked_bar_view(title: str, contributions: list[GlobalContribution]) -> dict[str, Any]:  # pyright: ignore[reportExplicitAny]
    largest = max((c.total for c in contributions), default=0.0)
    scale = PLOT_WIDTH / largest if largest > 0 else 0.0
    bars = [
        StackedBar(
            label=c.feature_name,
            y=50.0 + i * ROW_HEIGHT,
            hc_width=c.mean_abs_hc * scale,
            pd_width=c.mean_abs_pd * scale,
            total=c.total,
        )
        for i, c in enumerate(contributions)
    ]
    return {
        "title": title,
        "bars": bars,
        "left": LABEL_WIDTH,
        "bar_height": ROW_HEIGHT * 0.7,
        "hc_color": HC_COLOR,
        "pd_color": PD_COLOR,
        "width": LABEL_WIDTH + PLOT_WIDTH + 120.0,
        "height": 50.0 + len(bars) * ROW_HEIGHT + 50.0,
    }


class WaterfallBar(BaseModel):
    label: str
    value: float
    y: float
    x: float
    width: float
    fill: str


def waterfall_view(title: str, waterfall: Waterfall) -> dict[str, Any]:  # pyright: ignore[reportExplicitAny]
    entries = [(s.feature_name, s.contribution) for s in waterfall.steps]
    if waterfall.n_remaining:
        entries.append((f"{waterfall.n_remaining} other features", waterfall.remainder))

    # running totals from the baseline to the prediction
    ends = waterfall.base_value + np.cumsum([value for _, value in entries])
    starts = np.r_[waterfall.base_value, ends[:-1]] if entries else np.empty(0)
    points = np.r_[waterfall.base_value, ends, waterfall.prediction]
    low, high = float(points.min()), float(points.max())
    scale = PLOT_WIDTH / (high - low) if high > low else 0.0

    def x_of(v: float) -> float:
        return LABEL_WIDTH + (v - low) * scale

    bars = [
        WaterfallBar(
            label=label,
            value=value,
            y=50.0 + i * ROW_HEIGHT,
            x=x_of(min(float(start), float(end))),
            width=max(abs(float(end) - float(start)) * scale, 1.0),
            fill=PD_COLOR if value >= 0 else HC_COLOR,
        )
        for i, ((label, value), start, end) in enumerate(zip(entries, starts, ends))
    ]
    bottom = 50.0 + len(bars) * ROW_HEIGHT
    return {
        "title": title,
        "bars": bars,
        "bar_height": ROW_HEIGHT * 0.7,
        "base_value": waterfall.base_value,
        "prediction": waterfall.prediction,
        "base_x": x_of(waterfall.base_value),
        "prediction_x": x_of(waterfall.prediction),
        "output_space": waterfall.output_space,
        "top": 40.0,
        "bottom": bottom,
        "width": LABEL_WIDTH + PLOT_WIDTH + 140.0,
        "height": bottom + 50.0,
    }
