"""
Fitting Service
Lagged normalized cross-correlation of observed incidence against the dictionary,
mode classification and label agreement
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import cohen_kappa_score

from epidemic.state import IncidenceSeries, InfectionMode
from errors import FitFailureError, ParameterDomainError, UndefinedCorrelationError
from services.dictionary_service import MODE_ORDER, Dictionary, DictionaryEntry

logger = logging.getLogger(__name__)

DEFAULT_TAU_MAX = 25
MIN_OVERLAP = 3
# Correlations within this of the maximum are tied
TIE_TOLERANCE = 1e-12

FIT_COLUMNS = ["malware_id", "mode", "entry_id", "i0", "r0", "gamma",
               "correlation", "tau", "window_start", "window_end"]


@dataclass(frozen=True)
class ModeBest:
    entry_id: int
    correlation: float
    lag_tau: int


@dataclass(frozen=True)
class FitResult:
    best_entry: int
    mode: InfectionMode
    correlation: float
    lag_tau: int
    per_mode_best: Dict[InfectionMode, ModeBest]
    window: Tuple[int, int]
    entry: DictionaryEntry = field(repr=False)
    fitted_template: np.ndarray = field(repr=False)

    def mode_correlation(self, mode: InfectionMode) -> float:
        """Best correlation for a mode, NaN when that mode had no defined fit"""
        best = self.per_mode_best.get(mode)
        return best.correlation if best else float("nan")

    def to_row(self, malware_id: str) -> Dict[str, Any]:
        params = self.entry.params
        return {
            "malware_id": malware_id,
            "mode": self.mode.value,
            "entry_id": self.best_entry,
            "i0": params.i0,
            "r0": params.r0,
            "gamma": params.gamma,
            "correlation": self.correlation,
            "tau": self.lag_tau,
            "window_start": self.window[0],
            "window_end": self.window[1],
        }


@dataclass(frozen=True)
class LabelAgreement:
    n: int
    observed_agreement: float
    kappa: float
    degenerate: bool = False


def _resolve_window(x: IncidenceSeries, window: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    if window is None:
        return 0, len(x) - 1
    t_min, t_max = int(window[0]), int(window[1])
    if t_min < 0 or t_max < t_min:
        raise ParameterDomainError(f"invalid window ({t_min}, {t_max})")
    return t_min, t_max


def _observation(x: IncidenceSeries, window: Tuple[int, int], min_overlap: int) -> np.ndarray:
    t_min, t_max = window
    xw = x.window(t_min, t_max)
    if len(xw) < min_overlap:
        raise ParameterDomainError(f"window ({t_min}, {t_max}) holds fewer than {min_overlap} observations")
    if np.ptp(xw) == 0:
        raise UndefinedCorrelationError(f"observation is constant on window ({t_min}, {t_max})")
    return xw


def correlation_matrix(templates: np.ndarray, xw: np.ndarray, window: Tuple[int, int],
                       tau_max: int = DEFAULT_TAU_MAX,
                       min_overlap: int = MIN_OVERLAP) -> np.ndarray:
    """Normalized c(tau) of every template against the windowed observation.

    Entry (k, tau) pairs x_t with d_k[t - tau] over the overlap of the window and the
    shifted template, both mean-subtracted. Undefined values are NaN.
    """
    t_min, t_max = window
    n_entries, horizon = templates.shape
    out = np.full((n_entries, tau_max + 1), np.nan)
    for tau in range(tau_max + 1):
        t_lo = max(t_min, tau)
        t_hi = min(t_max, tau + horizon - 1)
        if t_hi - t_lo + 1 < min_overlap:
            continue
        xs = xw[t_lo - t_min:t_hi - t_min + 1]
        xc = xs - xs.mean()
        x_norm = np.linalg.norm(xc)
        if x_norm == 0:
            continue
        ds = templates[:, t_lo - tau:t_hi - tau + 1]
        dc = ds - ds.mean(axis=1, keepdims=True)
        d_norm = np.linalg.norm(dc, axis=1)
        defined = d_norm > 0
        out[defined, tau] = np.clip((dc[defined] @ xc) / (d_norm[defined] * x_norm), -1.0, 1.0)
    return out


def cross_correlate(d: IncidenceSeries, x: IncidenceSeries, tau_max: int = DEFAULT_TAU_MAX,
                    window: Optional[Tuple[int, int]] = None,
                    min_overlap: int = MIN_OVERLAP) -> List[Tuple[int, float]]:
    """(tau, c) for every lag with a defined coefficient"""
    resolved = _resolve_window(x, window)
    xw = _observation(x, resolved, min_overlap)
    row = correlation_matrix(d.values[np.newaxis, :], xw, resolved, tau_max, min_overlap)[0]
    return [(tau, float(c)) for tau, c in enumerate(row) if not np.isnan(c)]


def _best_in(matrix: np.ndarray, entry_ids: np.ndarray,
             tolerance: float = TIE_TOLERANCE) -> Optional[Tuple[int, float, int]]:
    """Best (entry_id, c, tau); values within tolerance of the maximum tie, and ties go to
    the smaller tau, then the smaller entry id"""
    if matrix.size == 0 or np.all(np.isnan(matrix)):
        return None
    top = np.nanmax(matrix)
    rows, taus = np.nonzero(np.nan_to_num(matrix, nan=-np.inf) >= top - tolerance)
    k = np.lexsort((entry_ids[rows], taus))[0]
    row, tau = rows[k], taus[k]
    return int(entry_ids[row]), float(matrix[row, tau]), int(tau)


def _winning_mode(per_mode: Dict[InfectionMode, ModeBest],
                  tolerance: float = TIE_TOLERANCE) -> InfectionMode:
    """Mode of the higher correlation, with the same tie rule as _best_in"""
    top = max(best.correlation for best in per_mode.values())
    tied = [mode for mode, best in per_mode.items() if best.correlation >= top - tolerance]
    return min(tied, key=lambda m: (per_mode[m].lag_tau, per_mode[m].entry_id))


def _shift_template(template: np.ndarray, tau: int, window: Tuple[int, int]) -> np.ndarray:
    """x^M over the window: template delayed by tau, zero outside the template"""
    t_min, t_max = window
    days = np.arange(t_min, t_max + 1) - tau
    shifted = np.zeros(len(days))
    valid = (days >= 0) & (days < len(template))
    shifted[valid] = template[days[valid]]
    return shifted


def fit(x: IncidenceSeries, dictionary: Dictionary, window: Optional[Tuple[int, int]] = None,
        tau_max: int = DEFAULT_TAU_MAX, min_overlap: int = MIN_OVERLAP,
        jobs: int = 1) -> FitResult:
    """Best template per mode by lagged correlation; the overall mode is the better of the two"""
    resolved = _resolve_window(x, window)
    xw = _observation(x, resolved, min_overlap)

    templates = dictionary.templates
    if jobs > 1 and len(dictionary) > jobs:
        chunks = np.array_split(np.arange(len(dictionary)), jobs)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(
                lambda idx: correlation_matrix(templates[idx], xw, resolved, tau_max, min_overlap),
                chunks,
            ))
        matrix = np.vstack(parts)
    else:
        matrix = correlation_matrix(templates, xw, resolved, tau_max, min_overlap)

    per_mode: Dict[InfectionMode, ModeBest] = {}
    for mode in MODE_ORDER:
        rows = dictionary.indices_for(mode)
        best = _best_in(matrix[rows], dictionary.entry_ids[rows])
        if best is not None:
            per_mode[mode] = ModeBest(*best)

    if not per_mode:
        raise FitFailureError("no dictionary entry produced a defined correlation")

    winner_mode = _winning_mode(per_mode)
    winner = per_mode[winner_mode]
    entry = dictionary.get(winner.entry_id)
    return FitResult(
        best_entry=winner.entry_id,
        mode=winner_mode,
        correlation=max(best.correlation for best in per_mode.values()),
        lag_tau=winner.lag_tau,
        per_mode_best=per_mode,
        window=resolved,
        entry=entry,
        fitted_template=_shift_template(entry.template.values, winner.lag_tau, resolved),
    )


def fits_to_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=FIT_COLUMNS)


def cohens_kappa(labels_a: Sequence[InfectionMode], labels_b: Sequence[InfectionMode],
                 exclude: Optional[Sequence[bool]] = None) -> LabelAgreement:
    """Cohen's kappa between two raters; `exclude` drops items (e.g. suspected hybrids)"""
    a = [label.value for label in labels_a]
    b = [label.value for label in labels_b]
    if len(a) != len(b):
        raise ParameterDomainError(f"label sequences differ in length ({len(a)} vs {len(b)})")
    if exclude is not None:
        if len(exclude) != len(a):
            raise ParameterDomainError("exclusion mask must match the label sequences")
        kept = [k for k, drop in enumerate(exclude) if not drop]
        a = [a[k] for k in kept]
        b = [b[k] for k in kept]
    if not a:
        raise ParameterDomainError("at least one labelled item is required")

    n = len(a)
    observed = sum(x == y for x, y in zip(a, b)) / n
    if len(set(a)) == 1 and len(set(b)) == 1:
        # p_e is 1 (same constant) or 0 (different constants); kappa is not informative
        kappa = 1.0 if a[0] == b[0] else 0.0
        return LabelAgreement(n, observed, kappa, degenerate=True)

    kappa = float(cohen_kappa_score(a, b))
    return LabelAgreement(n, observed, kappa)


def mode_recovery_report(inferred: Sequence[InfectionMode],
                         truth: Sequence[InfectionMode]) -> Dict[str, Any]:
    """Accuracy, kappa and confusion table of inferred modes against ground truth"""
    agreement = cohens_kappa(truth, inferred)
    confusion = pd.crosstab(
        pd.Series([m.value for m in truth], name="truth"),
        pd.Series([m.value for m in inferred], name="inferred"),
    )
    return {
        "n": agreement.n,
        "accuracy": agreement.observed_agreement,
        "kappa": agreement.kappa,
        "degenerate": agreement.degenerate,
        "confusion": confusion.to_dict(),
    }
