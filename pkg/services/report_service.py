"""
Report Service
Plot data and static SVG renderings for the prediction and eradication figures
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, select_autoescape

from services.vaccination_service import SplitReport

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
MODE_COLORS = {"P2P": "#d62728", "CS": "#1f77b4", "Hybrid": "#2ca02c"}
SIDE_COLORS = {"below": "#1f77b4", "above": "#d62728"}


@dataclass(frozen=True)
class PlotArea:
    left: float = 70.0
    top: float = 35.0
    width: float = 400.0
    height: float = 400.0

    @property
    def bottom(self) -> float:
        return self.top + self.height


class _Axis:
    """Maps data values onto a pixel range"""

    def __init__(self, low: float, high: float, start: float, end: float):
        if high <= low:
            high = low + 1.0
        self.low, self.high, self.start, self.end = low, high, start, end

    def __call__(self, value: float) -> float:
        return self.start + (value - self.low) / (self.high - self.low) * (self.end - self.start)

    def ticks(self, count: int = 5, labels=None) -> List[Dict[str, object]]:
        values = np.linspace(self.low, self.high, count)
        return [{"pos": self(v), "label": labels(v) if labels else f"{v:.3g}"} for v in values]


def _environment() -> Environment:
    return Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)),
                       autoescape=select_autoescape(["svg", "j2"]))


def _render(**context) -> str:
    return _environment().get_template("scatter.svg.j2").render(**context)


def prediction_plot_data(malware_ids: Sequence[str], predicted: Sequence[float],
                         actual: Sequence[float], modes: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame({
        "malware_id": list(malware_ids),
        "predicted_total": np.asarray(predicted, dtype=float),
        "actual_total": np.asarray(actual, dtype=float),
        "mode": list(modes),
    })


def render_prediction_svg(data: pd.DataFrame) -> str:
    """Predicted vs actual totals on log-log axes with the identity line"""
    area = PlotArea()
    positive = data[(data["predicted_total"] > 0) & (data["actual_total"] > 0)]
    if positive.empty:
        low, high = 0.0, 1.0
    else:
        logs = np.log10(np.concatenate([positive["predicted_total"], positive["actual_total"]]))
        low, high = float(np.floor(logs.min())), float(np.ceil(logs.max()))
    x_axis = _Axis(low, high, area.left, area.left + area.width)
    y_axis = _Axis(low, high, area.bottom, area.top)
    decade = lambda v: f"1e{v:.0f}" if float(v).is_integer() else f"1e{v:.1f}"

    points = [{"x": x_axis(np.log10(row.actual_total)), "y": y_axis(np.log10(row.predicted_total)),
               "color": MODE_COLORS.get(row.mode, "#7f7f7f")}
              for row in positive.itertuples(index=False)]
    identity = {"x1": x_axis(low), "y1": y_axis(low), "x2": x_axis(high), "y2": y_axis(high),
                "color": "#555", "dashed": True}
    legend = [{"label": mode, "color": color} for mode, color in MODE_COLORS.items()
              if mode in set(positive["mode"])]
    return _render(width=area.left + area.width + 30, height=area.bottom + 45, plot=area,
                   title="Predicted vs actual infected machines", x_label="actual (log10)",
                   y_label="predicted (log10)", x_ticks=x_axis.ticks(int(high - low) + 1, decade),
                   y_ticks=y_axis.ticks(int(high - low) + 1, decade), points=points,
                   lines=[identity], legend=legend)


def render_split_svg(report: SplitReport) -> str:
    """Fraction infected at vaccination vs time to termination with the split and per-side fits"""
    area = PlotArea()
    data = report.plot_data
    t_high = float(data["t_term"].max()) if len(data) else 1.0
    x_axis = _Axis(0.0, 1.0, area.left, area.left + area.width)
    y_axis = _Axis(0.0, max(t_high, 1.0) * 1.05, area.bottom, area.top)

    points = [{"x": x_axis(row.fraction), "y": y_axis(row.t_term), "color": SIDE_COLORS[row.side]}
              for row in data.itertuples(index=False)]
    lines = [{"x1": x_axis(report.threshold), "y1": area.bottom, "x2": x_axis(report.threshold),
              "y2": area.top, "color": "#555", "dashed": True}]
    for side, summary, (lo, hi) in (("below", report.below, (0.0, report.threshold)),
                                    ("above", report.above, (report.threshold, 1.0))):
        if summary.slope is None:
            continue
        rows = data[data["side"] == side]
        lo, hi = max(lo, float(rows["fraction"].min())), min(hi, float(rows["fraction"].max()))
        lines.append({"x1": x_axis(lo), "y1": y_axis(summary.slope * lo + summary.intercept),
                      "x2": x_axis(hi), "y2": y_axis(summary.slope * hi + summary.intercept),
                      "color": SIDE_COLORS[side], "dashed": False})
    legend = [{"label": f"fraction < {report.threshold}", "color": SIDE_COLORS["below"]},
              {"label": f"fraction >= {report.threshold}", "color": SIDE_COLORS["above"]}]
    return _render(width=area.left + area.width + 30, height=area.bottom + 45, plot=area,
                   title="Time to termination vs fraction infected at vaccination",
                   x_label="fraction infected at vaccination", y_label="time to termination (days)",
                   x_ticks=x_axis.ticks(6), y_ticks=y_axis.ticks(6, lambda v: f"{v:.0f}"),
                   points=points, lines=lines, legend=legend)


def write_report(directory: Union[str, Path], prediction_data: Optional[pd.DataFrame] = None,
                 split: Optional[SplitReport] = None, svg: bool = True) -> List[Path]:
    """Write figure CSVs and, when requested, their SVG renderings"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    if prediction_data is not None:
        path = directory / "figure_prediction.csv"
        prediction_data.to_csv(path, index=False, float_format="%.17g")
        written.append(path)
        if svg:
            svg_path = directory / "figure_prediction.svg"
            svg_path.write_text(render_prediction_svg(prediction_data), encoding="utf-8")
            written.append(svg_path)
    if split is not None:
        path = directory / "figure_eradication.csv"
        split.plot_data.to_csv(path, index=False, float_format="%.17g")
        written.append(path)
        if svg:
            svg_path = directory / "figure_eradication.svg"
            svg_path.write_text(render_split_svg(split), encoding="utf-8")
            written.append(svg_path)
    logger.info(f"📊 Wrote {len(written)} report files to {directory}")
    return written
