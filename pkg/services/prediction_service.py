"""
Prediction Service
Estimates the susceptible population of a malware from its early incidence
by affine rescaling of the best-fitting dictionary template
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from epidemic.simulator import EARLY_STOP_FRACTION, early_stop_index
from epidemic.state import IncidenceSeries
from errors import ParameterDomainError
from services.dictionary_service import Dictionary
from services.fitting_service import DEFAULT_TAU_MAX, MIN_OVERLAP, FitResult, fit

logger = logging.getLogger(__name__)

FIT_WINDOW_DAYS = 30
MIN_WINDOW_DAYS = 5
OFFSET_MODES = ("once", "per_day")

PREDICTION_COLUMNS = ["malware_id", "mode", "alpha", "offset", "predicted_total",
                      "observed_total", "correlation"]


@dataclass(frozen=True)
class SusceptiblePrediction:
    alpha_scale: float
    offset: float
    predicted_total: float
    fit: FitResult
    observed_cumulative: float
    degenerate: bool = False

    def to_row(self, malware_id: str, observed_total: float) -> Dict[str, Any]:
        return {
            "malware_id": malware_id,
            "mode": self.fit.mode.value,
            "alpha": self.alpha_scale,
            "offset": self.offset,
            "predicted_total": self.predicted_total,
            "observed_total": observed_total,
            "correlation": self.fit.correlation,
        }


def _affine_fit(x_window: np.ndarray, shifted: np.ndarray, window: Tuple[int, int],
                lag_tau: int, horizon: int) -> Tuple[float, float]:
    """Least-squares x_t ~ alpha * d_(t-tau) + offset over days the template covers"""
    t_min, t_max = window
    days = np.arange(t_min, t_max + 1)
    covered = (days - lag_tau >= 0) & (days - lag_tau < horizon)
    d = shifted[covered]
    x = x_window[covered]
    if len(d) < 2 or np.ptp(d) == 0:
        return 0.0, float(np.mean(x)) if len(x) else 0.0
    alpha, offset = np.polyfit(d, x, 1)
    return float(alpha), float(offset)


def predict_susceptible(x: IncidenceSeries, dictionary: Dictionary,
                        window: Optional[Tuple[int, int]] = None,
                        tau_max: int = DEFAULT_TAU_MAX,
                        offset_mode: str = "once",
                        early_stop_fraction: float = EARLY_STOP_FRACTION,
                        min_window_days: int = MIN_WINDOW_DAYS,
                        min_overlap: int = MIN_OVERLAP) -> SusceptiblePrediction:
    """Fit on the first 30 days (or the given window), rescale, and sum the template"""
    if offset_mode not in OFFSET_MODES:
        raise ParameterDomainError(f"offset_mode must be one of {OFFSET_MODES}, got {offset_mode!r}")
    window = window or (0, FIT_WINDOW_DAYS)
    t_min, t_max = window
    if t_max - t_min + 1 < min_window_days:
        raise ParameterDomainError(f"prediction window ({t_min}, {t_max}) is shorter than {min_window_days} days")

    fit_result = fit(x, dictionary, window=window, tau_max=tau_max, min_overlap=min_overlap)
    x_window = x.window(t_min, t_max)
    alpha, offset = _affine_fit(x_window, fit_result.fitted_template, window,
                                fit_result.lag_tau, dictionary.horizon_days)

    entry = fit_result.entry
    template = entry.template.values
    stop = early_stop_index(template, entry.params.population, early_stop_fraction)
    template_sum = float(np.sum(template[:stop]))
    offset_total = offset if offset_mode == "once" else offset * stop

    observed = float(np.sum(x_window))
    if alpha <= 0:
        logger.warning(f"⚠️ Degenerate affine fit (alpha={alpha:.4g}); falling back to observed count {observed:.0f}")
        return SusceptiblePrediction(alpha, offset, observed, fit_result, observed, degenerate=True)

    predicted = max(alpha * template_sum + offset_total, observed, 0.0)
    return SusceptiblePrediction(alpha, offset, predicted, fit_result, observed)


def prediction_spearman(predicted: Sequence[float], actual: Sequence[float]) -> Tuple[float, float]:
    """Spearman rho and p-value between predicted and actual totals"""
    if len(predicted) != len(actual) or len(predicted) < 3:
        raise ParameterDomainError("need at least three paired predictions")
    rho, p_value = stats.spearmanr(predicted, actual)
    return float(rho), float(p_value)


def overshoot_by_mode(frame: pd.DataFrame) -> Dict[str, float]:
    """Median predicted/actual ratio per inferred mode"""
    ratios = frame.assign(ratio=frame["predicted_total"] / frame["observed_total"].where(frame["observed_total"] > 0))
    return {str(mode): float(group["ratio"].median()) for mode, group in ratios.groupby("mode")}
