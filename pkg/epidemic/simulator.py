"""
Deterministic SIR integration for P2P, CS and hybrid infection.

dS/dt = -beta_p2p*S*I - beta_cs*S
dI/dt =  beta_p2p*S*I + beta_cs*S - gamma*I
dR/dt =  gamma*I

Integration is classic fixed-step RK4, sampled at integer days. The core works on
arrays of independent strains so a whole dictionary grid advances in one pass.
"""

import logging
from dataclasses import dataclass

import numpy as np

from epidemic.state import CompartmentTrajectory, EpidemicParams, IncidenceSeries
from errors import NumericalInstabilityError, ParameterDomainError

logger = logging.getLogger(__name__)

DEFAULT_STEP_DAYS = 0.05
DEFAULT_HORIZON_DAYS = 730
UNDERSHOOT_TOLERANCE = 1e-9
EARLY_STOP_FRACTION = 1e-9


@dataclass(frozen=True)
class BatchResult:
    """Daily samples of a batch integration, shape (horizon+1, n)"""

    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    failed: np.ndarray


def _steps_per_day(step_days: float) -> int:
    if not step_days > 0:
        raise ParameterDomainError(f"step must be positive, got {step_days}")
    steps = int(round(1.0 / step_days))
    if steps < 1 or abs(steps * step_days - 1.0) > 1e-9:
        raise ParameterDomainError(f"step {step_days} does not divide one day")
    return steps


def integrate_batch(s0, i0, r0, beta_p2p, beta_cs, gamma, horizon_days: int,
                    step_days: float = DEFAULT_STEP_DAYS,
                    undershoot_tolerance: float = UNDERSHOOT_TOLERANCE) -> BatchResult:
    """Integrate n independent strains at once.

    Compartments that dip below -undershoot_tolerance*N mark their column as failed;
    smaller undershoots are clamped to zero.
    """
    if horizon_days < 1:
        raise ParameterDomainError(f"horizon_days must be >= 1, got {horizon_days}")
    steps = _steps_per_day(step_days)
    h = 1.0 / steps

    s, i, r, bp, bc, g = (np.atleast_1d(np.asarray(v, dtype=float)).copy()
                          for v in (s0, i0, r0, beta_p2p, beta_cs, gamma))
    s, i, r, bp, bc, g = np.broadcast_arrays(s, i, r, bp, bc, g)
    s, i, r = s.copy(), i.copy(), r.copy()
    population = s + i + r
    floor = -undershoot_tolerance * population
    failed = np.zeros(s.shape, dtype=bool)

    out_s = np.empty((horizon_days + 1,) + s.shape)
    out_i = np.empty_like(out_s)
    out_r = np.empty_like(out_s)
    out_s[0], out_i[0], out_r[0] = s, i, r

    def rhs(s_, i_):
        force = bp * s_ * i_ + bc * s_
        recovery = g * i_
        return -force, force - recovery, recovery

    for day in range(1, horizon_days + 1):
        for _ in range(steps):
            k1s, k1i, k1r = rhs(s, i)
            k2s, k2i, k2r = rhs(s + 0.5 * h * k1s, i + 0.5 * h * k1i)
            k3s, k3i, k3r = rhs(s + 0.5 * h * k2s, i + 0.5 * h * k2i)
            k4s, k4i, k4r = rhs(s + h * k3s, i + h * k3i)
            s = s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
            i = i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
            r = r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)

            below = (s < floor) | (i < floor) | (r < floor)
            if below.any():
                failed |= below
            s = np.maximum(s, 0.0)
            i = np.maximum(i, 0.0)
            r = np.maximum(r, 0.0)
        out_s[day], out_i[day], out_r[day] = s, i, r

    if failed.any():
        logger.debug(f"{int(failed.sum())} of {failed.size} strains undershot during integration")
    return BatchResult(out_s, out_i, out_r, failed)


def simulate_from(s0: float, i0: float, r0: float, beta_p2p: float, beta_cs: float,
                  gamma: float, horizon_days: int,
                  step_days: float = DEFAULT_STEP_DAYS) -> CompartmentTrajectory:
    """Integrate one strain from an arbitrary compartment state"""
    if min(s0, i0, r0) < 0:
        raise ParameterDomainError("initial compartments must be non-negative")
    if min(beta_p2p, beta_cs, gamma) < 0:
        raise ParameterDomainError("rates must be non-negative")
    batch = integrate_batch(s0, i0, r0, beta_p2p, beta_cs, gamma, horizon_days, step_days)
    if batch.failed[0]:
        raise NumericalInstabilityError(
            f"compartment undershoot with step {step_days} day "
            f"(beta_p2p={beta_p2p:.3g}, beta_cs={beta_cs:.3g}, gamma={gamma:.3g})"
        )
    return CompartmentTrajectory(
        s=batch.s[:, 0], i=batch.i[:, 0], r=batch.r[:, 0],
        horizon_days=horizon_days, population=float(s0 + i0 + r0),
    )


def simulate(params: EpidemicParams, horizon_days: int = DEFAULT_HORIZON_DAYS,
             step_days: float = DEFAULT_STEP_DAYS) -> CompartmentTrajectory:
    """Forward simulation of one strain from S(0)=N-I(0), I(0), R(0)=0"""
    return simulate_from(
        params.susceptible_at_start, params.i0, 0.0,
        params.beta_p2p, params.beta_cs, params.gamma,
        horizon_days, step_days,
    )


def incidence_of(traj: CompartmentTrajectory) -> IncidenceSeries:
    """New infections per day: s[t] - s[t+1], floored at zero"""
    return IncidenceSeries(np.maximum(traj.s[:-1] - traj.s[1:], 0.0))


def incidence_matrix(s: np.ndarray) -> np.ndarray:
    """Row-wise incidence for daily samples of shape (horizon+1, n); returns (n, horizon)"""
    return np.maximum(s[:-1] - s[1:], 0.0).T


def early_stop_index(values: np.ndarray, population: float,
                     fraction: float = EARLY_STOP_FRACTION) -> int:
    """First day after the incidence peak where incidence drops below fraction*N.

    Returns len(values) when the series never drops below the threshold.
    """
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return 0
    peak = int(np.argmax(values))
    below = np.nonzero(values[peak:] < fraction * population)[0]
    if len(below) == 0:
        return len(values)
    return peak + int(below[0])


def template_total(values: np.ndarray, population: float,
                   fraction: float = EARLY_STOP_FRACTION) -> float:
    """Cumulative incidence truncated at the early-stop day"""
    stop = early_stop_index(values, population, fraction)
    return float(np.sum(np.asarray(values, dtype=float)[:stop]))
