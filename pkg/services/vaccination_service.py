"""
Vaccination Service
Time to termination, per-malware features, regression tree with cross validation,
permutation importance and the eradication split analysis
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.inspection import permutation_importance as sklearn_permutation_importance
from sklearn.model_selection import KFold, cross_val_predict
from sklearn.tree import DecisionTreeRegressor

from epidemic.state import IncidenceSeries, InfectionMode
from errors import (FeatureExtractionError, FitFailureError, InsufficientDataError,
                    ParameterDomainError, UndefinedCorrelationError)
from services.dictionary_service import Dictionary
from services.fitting_service import DEFAULT_TAU_MAX, MIN_OVERLAP
from services.prediction_service import FIT_WINDOW_DAYS, MIN_WINDOW_DAYS, SusceptiblePrediction, predict_susceptible

logger = logging.getLogger(__name__)

TERMINATION_FRACTION = 0.99
QUIET_DAYS = 14
SPLIT_THRESHOLD = 0.6
MIN_TREE_SAMPLES = 20

FEATURE_NAMES = ("log_predicted_susceptible", "log_infected_at_vax", "beta_best", "fit_p2p", "fit_cs")
OUTCOME_COLUMNS = ["malware_id", "vaccination_day", "infected_at_vax", "predicted_susceptible",
                   "fraction", "t_term", "censored"]


@dataclass(frozen=True)
class VaccinationOutcome:
    malware_id: str
    vaccination_day: int
    infected_at_vax: float
    predicted_susceptible: float
    fraction_infected_at_vax: float
    t_term: int
    censored: bool

    def to_row(self) -> Dict[str, Any]:
        return {
            "malware_id": self.malware_id,
            "vaccination_day": self.vaccination_day,
            "infected_at_vax": self.infected_at_vax,
            "predicted_susceptible": self.predicted_susceptible,
            "fraction": self.fraction_infected_at_vax,
            "t_term": self.t_term,
            "censored": self.censored,
        }


@dataclass(frozen=True)
class FeatureVector:
    log_predicted_susceptible: float
    log_infected_at_vax: float
    beta_best: float
    fit_p2p: float
    fit_cs: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)


@dataclass
class VaccinationDataset:
    """Outcomes and features of every malware that survived extraction, in input order"""

    malware_ids: List[str] = field(default_factory=list)
    outcomes: List[VaccinationOutcome] = field(default_factory=list)
    features: List[FeatureVector] = field(default_factory=list)
    excluded: Dict[str, str] = field(default_factory=dict)

    def feature_matrix(self) -> np.ndarray:
        if not self.features:
            return np.empty((0, len(FEATURE_NAMES)))
        return np.vstack([f.to_array() for f in self.features])

    def features_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(f) for f in self.features], columns=list(FEATURE_NAMES))
        frame.insert(0, "malware_id", self.malware_ids)
        return frame

    def outcomes_frame(self) -> pd.DataFrame:
        return pd.DataFrame([o.to_row() for o in self.outcomes], columns=OUTCOME_COLUMNS)


@dataclass(frozen=True)
class TreeResult:
    tree: DecisionTreeRegressor
    cv_spearman: float
    cv_p_value: float
    oof_predictions: np.ndarray
    undefined: bool = False


@dataclass(frozen=True)
class SideSummary:
    n: int
    mean_t_term: Optional[float]
    r_squared: Optional[float]
    p_value: Optional[float]
    slope: Optional[float]
    intercept: Optional[float]

    @property
    def empty(self) -> bool:
        return self.n == 0


@dataclass(frozen=True)
class SplitReport:
    threshold: float
    below: SideSummary
    above: SideSummary
    ratio: Optional[float]
    plot_data: pd.DataFrame = field(repr=False)

    def summary(self) -> Dict[str, Any]:
        return {"threshold": self.threshold, "below": asdict(self.below),
                "above": asdict(self.above), "ratio": self.ratio}


def time_to_termination(x: IncidenceSeries, fraction: float = TERMINATION_FRACTION,
                        quiet_days: int = QUIET_DAYS) -> Tuple[int, bool]:
    """Smallest day whose cumulative reaches `fraction` of the total, and the censoring flag"""
    values = x.values
    total = float(values.sum())
    if total <= 0:
        raise ParameterDomainError("time to termination is undefined for an all-zero series")
    cumulative = np.cumsum(values)
    # relative slack absorbs the rounding of fraction * total
    t_term = int(np.argmax(cumulative >= fraction * total * (1.0 - 1e-12)))
    last_active = int(np.nonzero(values)[0][-1])
    trailing_zeros = len(values) - 1 - max(last_active, t_term)
    return t_term, trailing_zeros < quiet_days


def build_outcome(malware_id: str, x: IncidenceSeries, vaccination_day: int,
                  predicted_susceptible: float, fraction: float = TERMINATION_FRACTION,
                  quiet_days: int = QUIET_DAYS) -> VaccinationOutcome:
    t_term, censored = time_to_termination(x, fraction, quiet_days)
    if censored:
        t_term = len(x) - 1
    infected = float(np.sum(x.values[:vaccination_day + 1]))
    if predicted_susceptible > 0:
        share = min(infected / predicted_susceptible, 1.0)
    else:
        share = 1.0 if infected > 0 else 0.0
    return VaccinationOutcome(malware_id, int(vaccination_day), infected, float(predicted_susceptible),
                              share, t_term, censored)


def feature_window(vaccination_day: int, fit_window_days: int = FIT_WINDOW_DAYS) -> Tuple[int, int]:
    """First 30 days, or the days up to vaccination when it came earlier"""
    return 0, min(fit_window_days, vaccination_day)


def extract_features(x: IncidenceSeries, dictionary: Dictionary, vaccination_day: int,
                     malware_id: Optional[str] = None, tau_max: int = DEFAULT_TAU_MAX,
                     fit_window_days: int = FIT_WINDOW_DAYS, offset_mode: str = "once",
                     prediction: Optional[SusceptiblePrediction] = None) -> FeatureVector:
    window = feature_window(vaccination_day, fit_window_days)
    if prediction is None:
        prediction = _predict_for_features(x, dictionary, window, malware_id, tau_max, offset_mode)
    fit = prediction.fit
    infected = float(np.sum(x.values[:vaccination_day + 1]))
    # a mode without any defined correlation counts as the worst possible fit
    fit_p2p, fit_cs = (np.nan_to_num(fit.mode_correlation(mode), nan=-1.0)
                       for mode in (InfectionMode.P2P, InfectionMode.CS))
    return FeatureVector(
        log_predicted_susceptible=float(np.log10(1.0 + max(prediction.predicted_total, 0.0))),
        log_infected_at_vax=float(np.log10(1.0 + infected)),
        beta_best=float(fit.entry.params.beta),
        fit_p2p=float(fit_p2p),
        fit_cs=float(fit_cs),
    )


def _predict_for_features(x: IncidenceSeries, dictionary: Dictionary, window: Tuple[int, int],
                          malware_id: Optional[str], tau_max: int,
                          offset_mode: str, min_window_days: int = MIN_WINDOW_DAYS,
                          min_overlap: int = MIN_OVERLAP) -> SusceptiblePrediction:
    try:
        return predict_susceptible(x, dictionary, window=window, tau_max=tau_max, offset_mode=offset_mode,
                                   min_window_days=min_window_days, min_overlap=min_overlap)
    except (ParameterDomainError, UndefinedCorrelationError, FitFailureError) as e:
        raise FeatureExtractionError(f"{malware_id or 'malware'}: {e}", malware_id) from e


def build_dataset(series: Sequence[Tuple[str, IncidenceSeries, Optional[int]]], dictionary: Dictionary,
                  tau_max: int = DEFAULT_TAU_MAX, fit_window_days: int = FIT_WINDOW_DAYS,
                  fraction: float = TERMINATION_FRACTION, quiet_days: int = QUIET_DAYS,
                  offset_mode: str = "once", min_window_days: int = MIN_WINDOW_DAYS,
                  min_overlap: int = MIN_OVERLAP) -> VaccinationDataset:
    """Outcome and features per (malware_id, incidence, vaccination_day); failures are counted"""
    dataset = VaccinationDataset()
    for malware_id, x, vaccination_day in series:
        if vaccination_day is None:
            dataset.excluded[malware_id] = "no vaccination date"
            continue
        try:
            window = feature_window(vaccination_day, fit_window_days)
            prediction = _predict_for_features(x, dictionary, window, malware_id, tau_max, offset_mode,
                                                min_window_days, min_overlap)
            features = extract_features(x, dictionary, vaccination_day, malware_id, tau_max,
                                        fit_window_days, offset_mode, prediction)
            outcome = build_outcome(malware_id, x, vaccination_day, prediction.predicted_total,
                                    fraction, quiet_days)
        except (FeatureExtractionError, ParameterDomainError) as e:
            dataset.excluded[malware_id] = str(e)
            logger.warning(f"⚠️ Excluding {malware_id} from vaccination analysis: {e}")
            continue
        dataset.malware_ids.append(malware_id)
        dataset.outcomes.append(outcome)
        dataset.features.append(features)
    logger.info(f"✅ Vaccination dataset: {len(dataset.outcomes)} malware, {len(dataset.excluded)} excluded")
    return dataset


def _spearman(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan"), float("nan")
    rho, p_value = stats.spearmanr(a, b)
    return float(rho), float(p_value)


def _tree(max_depth: int, min_leaf: int, seed: int) -> DecisionTreeRegressor:
    return DecisionTreeRegressor(max_depth=max_depth, min_samples_leaf=min_leaf, random_state=seed)


def _out_of_fold(x: np.ndarray, y: np.ndarray, folds: int, seed: int,
                 max_depth: int, min_leaf: int) -> np.ndarray:
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    return cross_val_predict(_tree(max_depth, min_leaf, seed), x, y, cv=splitter)


def fit_regression_tree(features: np.ndarray, targets: Sequence[float], folds: int = 10,
                        seed: int = 0, max_depth: int = 4, min_leaf: int = 5,
                        min_samples: int = MIN_TREE_SAMPLES) -> TreeResult:
    """Variance-reduction tree; cv_spearman compares out-of-fold predictions with targets"""
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if len(y) < min_samples:
        raise InsufficientDataError(f"regression tree needs at least {min_samples} samples, got {len(y)}")

    predictions = _out_of_fold(x, y, folds, seed, max_depth, min_leaf)
    rho, p_value = _spearman(predictions, y)
    undefined = bool(np.isnan(rho))
    if undefined:
        logger.warning("⚠️ Cross-validated Spearman rho is undefined (constant predictions or targets)")

    tree = _tree(max_depth, min_leaf, seed).fit(x, y)
    return TreeResult(tree, rho, p_value, predictions, undefined)


def cv_permutation_test(features: np.ndarray, targets: Sequence[float], n_permutations: int = 199,
                        folds: int = 10, seed: int = 0, max_depth: int = 4,
                        min_leaf: int = 5) -> Tuple[float, float]:
    """One-sided permutation p-value of the out-of-fold Spearman rho"""
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    observed, _ = _spearman(_out_of_fold(x, y, folds, seed, max_depth, min_leaf), y)
    if np.isnan(observed):
        return observed, 1.0
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(n_permutations):
        shuffled = rng.permutation(y)
        rho, _ = _spearman(_out_of_fold(x, shuffled, folds, seed, max_depth, min_leaf), shuffled)
        if not np.isnan(rho) and rho >= observed:
            exceed += 1
    return observed, (exceed + 1) / (n_permutations + 1)


def _spearman_score(estimator, x, y) -> float:
    rho, _ = _spearman(estimator.predict(x), np.asarray(y, dtype=float))
    return 0.0 if np.isnan(rho) else rho


def permutation_importance(tree: DecisionTreeRegressor, features: np.ndarray, targets: Sequence[float],
                           repeats: int = 20, seed: int = 0,
                           feature_names: Sequence[str] = FEATURE_NAMES) -> List[Tuple[str, float]]:
    """Mean drop in Spearman rho when each feature is shuffled, ranked descending"""
    result = sklearn_permutation_importance(
        tree, np.asarray(features, dtype=float), np.asarray(targets, dtype=float),
        scoring=_spearman_score, n_repeats=repeats, random_state=seed,
    )
    ranked = sorted(zip(feature_names, result.importances_mean), key=lambda item: -item[1])
    return [(name, float(value)) for name, value in ranked]


def _side_summary(fraction: np.ndarray, t_term: np.ndarray) -> SideSummary:
    n = len(fraction)
    if n == 0:
        return SideSummary(0, None, None, None, None, None)
    mean = float(np.mean(t_term))
    if n < 3 or np.ptp(fraction) == 0 or np.ptp(t_term) == 0:
        # no rank association can be measured
        r_squared, p_value = 0.0, 1.0
    else:
        regression = stats.linregress(stats.rankdata(fraction), stats.rankdata(t_term))
        r_squared, p_value = float(regression.rvalue ** 2), float(regression.pvalue)
    slope = intercept = None
    if n >= 2 and np.ptp(fraction) > 0:
        slope, intercept = (float(v) for v in np.polyfit(fraction, t_term, 1))
    return SideSummary(n, mean, r_squared, p_value, slope, intercept)


def eradication_split_analysis(outcomes: Sequence[VaccinationOutcome],
                               threshold: float = SPLIT_THRESHOLD) -> SplitReport:
    """Compare time to termination below and above a fraction-infected threshold"""
    plot = pd.DataFrame({
        "malware_id": [o.malware_id for o in outcomes],
        "fraction": [o.fraction_infected_at_vax for o in outcomes],
        "t_term": [o.t_term for o in outcomes],
    })
    plot["side"] = np.where(plot["fraction"] < threshold, "below", "above")

    below_rows = plot[plot["side"] == "below"]
    above_rows = plot[plot["side"] == "above"]
    below = _side_summary(below_rows["fraction"].to_numpy(float), below_rows["t_term"].to_numpy(float))
    above = _side_summary(above_rows["fraction"].to_numpy(float), above_rows["t_term"].to_numpy(float))

    ratio = None
    if below.empty or above.empty:
        logger.warning(f"⚠️ Split at {threshold}: {'below' if below.empty else 'above'} side is empty")
    elif below.mean_t_term > 0:
        ratio = above.mean_t_term / below.mean_t_term
    return SplitReport(threshold, below, above, ratio, plot)
