"""
Survival Analysis
Cox proportional-hazards model of time to termination (event = termination)
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from errors import CollinearityError, InsufficientDataError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 20
MAX_ITER = 100
TOLERANCE = 1e-8
ANOMALY_LIMIT = 10.0
SINGULAR_RATIO = 1e-10


@dataclass(frozen=True)
class HazardModel:
    feature_names: List[str]
    coefficients: np.ndarray
    hazard_ratios: np.ndarray
    standard_errors: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    anomalies: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "feature": self.feature_names,
            "coefficient": self.coefficients,
            "hazard_ratio": self.hazard_ratios,
            "standard_error": self.standard_errors,
            "p_value": self.p_values,
            "anomaly": [name in self.anomalies for name in self.feature_names],
        })


def _check_collinearity(xc: np.ndarray, names: Sequence[str]) -> None:
    """Raise when the centered design has a (near) null direction"""
    _, singular, vt = np.linalg.svd(xc, full_matrices=False)
    if singular[0] == 0 or singular[-1] / singular[0] < SINGULAR_RATIO:
        null = np.abs(vt[-1])
        involved = [names[k] for k in np.nonzero(null > 0.1 * null.max())[0]]
        raise CollinearityError(involved)


def _partial_likelihood(beta: np.ndarray, x: np.ndarray, durations: np.ndarray,
                        events: np.ndarray, event_times: np.ndarray):
    """Breslow log partial likelihood, gradient and observed information"""
    eta = x @ beta
    # shift for overflow safety; cancels within each risk-set ratio
    weights = np.exp(eta - eta.max())
    p = x.shape[1]
    loglik = float(eta[events].sum())
    gradient = x[events].sum(axis=0)
    information = np.zeros((p, p))
    for t in event_times:
        at_risk = durations >= t
        d = int(np.count_nonzero(events & (durations == t)))
        w = weights[at_risk]
        xr = x[at_risk]
        s0 = w.sum()
        mean = (w @ xr) / s0
        second = (xr * w[:, None]).T @ xr / s0
        loglik -= d * (np.log(s0) + eta.max())
        gradient = gradient - d * mean
        information += d * (second - np.outer(mean, mean))
    return loglik, gradient, information


def fit_cox(features: np.ndarray, durations: Sequence[float], censored: Sequence[bool],
            feature_names: Sequence[str], max_iter: int = MAX_ITER,
            tolerance: float = TOLERANCE, min_samples: int = MIN_SAMPLES) -> HazardModel:
    """Newton maximization of the Breslow partial likelihood.

    Covariates are centered before fitting, so shifting any covariate by a constant leaves
    the coefficients unchanged. Steps that lower the likelihood are halved.
    """
    x = np.asarray(features, dtype=float)
    t = np.asarray(durations, dtype=float)
    events = ~np.asarray(censored, dtype=bool)
    names = list(feature_names)
    if x.ndim != 2 or x.shape[0] != len(t) or x.shape[1] != len(names):
        raise ValueError("features must be (n, p) and match durations and feature_names")
    if len(t) < min_samples:
        raise InsufficientDataError(f"Cox model needs at least {min_samples} samples, got {len(t)}")
    if len(np.unique(t)) < 2:
        raise InsufficientDataError("Cox model needs at least two distinct durations")
    if not events.any():
        raise InsufficientDataError("Cox model needs at least one observed termination")

    xc = x - x.mean(axis=0)
    _check_collinearity(xc, names)
    event_times = np.unique(t[events])

    beta = np.zeros(x.shape[1])
    loglik, gradient, information = _partial_likelihood(beta, xc, t, events, event_times)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.linalg.norm(gradient) < tolerance:
            converged = True
            break
        try:
            step = np.linalg.solve(information, gradient)
        except np.linalg.LinAlgError:
            _check_collinearity(xc, names)
            raise CollinearityError(names)
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            new = _partial_likelihood(candidate, xc, t, events, event_times)
            if np.isfinite(new[0]) and new[0] >= loglik - 1e-12:
                break
            scale *= 0.5
        beta = candidate
        loglik, gradient, information = new
    else:
        converged = np.linalg.norm(gradient) < tolerance

    try:
        covariance = np.linalg.inv(information)
    except np.linalg.LinAlgError:
        raise CollinearityError(names)
    standard_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(standard_errors > 0, beta / standard_errors, np.nan)
    p_values = 2.0 * stats.norm.sf(np.abs(z))

    anomalies = [names[k] for k in range(len(names))
                 if abs(beta[k]) > ANOMALY_LIMIT or standard_errors[k] > ANOMALY_LIMIT]
    if not converged:
        logger.warning(f"⚠️ Cox model did not converge after {iterations} iterations "
                       f"(gradient norm {np.linalg.norm(gradient):.3g})")
    for name in anomalies:
        logger.warning(f"⚠️ Hazard coefficient for {name} has anomalous magnitude")

    return HazardModel(
        feature_names=names,
        coefficients=beta,
        hazard_ratios=np.exp(beta),
        standard_errors=standard_errors,
        p_values=p_values,
        converged=bool(converged),
        iterations=iterations,
        log_likelihood=loglik,
        anomalies=anomalies,
    )


def hazard_report(model: HazardModel) -> str:
    """Aligned text table: coefficient, hazard, SE, p"""
    width = max(len("Feature"), *(len(n) for n in model.feature_names))
    lines = [f"{'Feature':<{width}}  {'Coefficient':>12}  {'Hazard':>10}  {'SE':>10}  {'p':>10}"]
    for k, name in enumerate(model.feature_names):
        flag = "  !" if name in model.anomalies else ""
        lines.append(
            f"{name:<{width}}  {model.coefficients[k]:>12.4f}  {model.hazard_ratios[k]:>10.4f}  "
            f"{model.standard_errors[k]:>10.4f}  {model.p_values[k]:>10.3g}{flag}"
        )
    if not model.converged:
        lines.append(f"NOT CONVERGED after {model.iterations} iterations")
    if model.anomalies:
        lines.append("! anomalous magnitude (|coefficient| > 10 or SE > 10)")
    return "\n".join(lines) + "\n"
