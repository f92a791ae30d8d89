import numpy as np
import pytest
from scipy.optimize import brentq

from epidemic import EpidemicParams, InfectionMode, incidence_of, simulate, simulate_from
from epidemic.simulator import early_stop_index, integrate_batch, template_total
from errors import NumericalInstabilityError, ParameterDomainError


def _p2p(i0=10.0, r0=3.0, gamma=0.1, population=1e5):
    return EpidemicParams.from_r0(InfectionMode.P2P, i0, r0, gamma, population)


def _cs(i0=1.0, r0=2.0, gamma=0.01, population=1e4):
    return EpidemicParams.from_r0(InfectionMode.CS, i0, r0, gamma, population)


def test_from_r0_rate_convention():
    p2p = _p2p()
    cs = _cs()
    assert p2p.beta_p2p == pytest.approx(3.0 * 0.1 / (1e5 - 10))
    assert p2p.beta_cs == 0.0
    assert cs.beta_cs == pytest.approx(0.02)
    assert cs.beta_p2p == 0.0
    assert cs.beta == cs.beta_cs


@pytest.mark.parametrize("kwargs", [
    {"i0": 0.5},
    {"population": 5.0, "i0": 10.0},
    {"r0": 0.0},
    {"gamma": -0.1},
])
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ParameterDomainError):
        _p2p(**kwargs)


def test_mode_rate_exclusivity():
    with pytest.raises(ParameterDomainError):
        EpidemicParams(InfectionMode.CS, 1.0, 2.0, 0.01, 1e4, beta_p2p=1e-6, beta_cs=0.02)


def test_hybrid_requires_explicit_rates():
    with pytest.raises(ParameterDomainError):
        EpidemicParams.from_r0(InfectionMode.HYBRID, 1.0, 2.0, 0.01, 1e4)
    hybrid = EpidemicParams.hybrid(1.0, 0.01, 1e4, beta_p2p=1e-6, beta_cs=0.01)
    assert hybrid.r0 == pytest.approx((1e-6 * (1e4 - 1) + 0.01) / 0.01)


def test_population_is_conserved():
    traj = simulate(_p2p(), horizon_days=365)
    assert traj.conservation_drift() <= 1e-6
    assert len(traj.s) == 366


def test_cs_matches_closed_form():
    params = _cs()
    traj = simulate(params, horizon_days=200)
    days = np.arange(201)
    expected = params.susceptible_at_start * np.exp(-params.beta_cs * days)
    np.testing.assert_allclose(traj.s, expected, rtol=1e-9)


def test_cs_incidence_strictly_decreasing():
    incidence = incidence_of(simulate(_cs(), horizon_days=200)).values
    assert np.all(np.diff(incidence) < 0)


def test_p2p_final_size_relation():
    params = _p2p()
    traj = simulate(params, horizon_days=730)
    s0, n = params.susceptible_at_start, params.population
    ratio = params.r0 / s0

    def final_size(x):
        return np.log(x / s0) + ratio * (n - x)

    root = brentq(final_size, 1e-9, s0 / params.r0)
    assert traj.s[-1] == pytest.approx(root, rel=1e-4)


def test_step_halving_changes_little():
    params = _p2p(r0=2.5, gamma=0.05)
    coarse = simulate(params, horizon_days=365, step_days=0.05)
    fine = simulate(params, horizon_days=365, step_days=0.025)
    np.testing.assert_allclose(coarse.s, fine.s, rtol=1e-6)
    np.testing.assert_allclose(coarse.i, fine.i, rtol=1e-6, atol=1e-6)


def test_step_must_divide_a_day():
    with pytest.raises(ParameterDomainError):
        simulate(_cs(), horizon_days=10, step_days=0.3)


def test_undershoot_raises():
    with pytest.raises(NumericalInstabilityError):
        simulate_from(1e4, 1.0, 0.0, 0.0, 100.0, 0.01, horizon_days=5, step_days=0.5)


def test_incidence_has_horizon_length():
    incidence = incidence_of(simulate(_p2p(), horizon_days=120))
    assert len(incidence) == 120
    assert incidence.total == pytest.approx(_p2p().susceptible_at_start - simulate(_p2p(), 120).s[-1])


def test_early_stop_after_peak():
    values = np.array([1.0, 5.0, 10.0, 4.0, 1e-12, 0.0])
    assert early_stop_index(values, population=1e3, fraction=1e-9) == 4
    assert template_total(values, population=1e3, fraction=1e-9) == pytest.approx(20.0)
    assert early_stop_index(np.ones(5), population=1.0, fraction=1e-9) == 5


def test_trajectory_frame_columns(tmp_path):
    traj = simulate(_cs(), horizon_days=10)
    frame = traj.to_frame()
    assert list(frame.columns) == ["day", "s", "i", "r"]
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    assert path.read_text().startswith("day,s,i,r")


def test_cs_closed_form_example():
    params = EpidemicParams.from_r0(InfectionMode.CS, 1.0, 10.0, 0.01, 1001.0)
    traj = simulate(params, horizon_days=10)
    assert traj.s[10] == pytest.approx(1000.0 * np.exp(-1.0), rel=1e-4)
    assert incidence_of(traj).values[0] == pytest.approx(1000.0 * (1 - np.exp(-0.1)), rel=1e-3)


def test_no_infection_force_keeps_susceptibles():
    traj = simulate_from(1000.0, 5.0, 0.0, 0.0, 0.0, 0.01, horizon_days=30)
    np.testing.assert_array_equal(traj.s, np.full(31, 1000.0))
    np.testing.assert_allclose(traj.i, 5.0 * np.exp(-0.01 * np.arange(31)), rtol=1e-9)


def test_hybrid_reduces_to_pure_modes():
    p2p = _p2p()
    as_hybrid = EpidemicParams.hybrid(p2p.i0, p2p.gamma, p2p.population, beta_p2p=p2p.beta_p2p, beta_cs=0.0)
    np.testing.assert_array_equal(simulate(as_hybrid, 200).s, simulate(p2p, 200).s)

    cs = _cs()
    as_hybrid = EpidemicParams.hybrid(cs.i0, cs.gamma, cs.population, beta_p2p=0.0, beta_cs=cs.beta_cs)
    np.testing.assert_array_equal(simulate(as_hybrid, 200).i, simulate(cs, 200).i)


def test_p2p_incidence_is_unimodal():
    incidence = incidence_of(simulate(_p2p(i0=10.0, r0=3.0, gamma=0.05, population=1e5), 730)).values
    peak = int(np.argmax(incidence))
    assert 0 < peak < len(incidence) - 1
    assert np.all(np.diff(incidence[:peak + 1]) >= -1e-9)
    assert np.all(np.diff(incidence[peak:]) <= 1e-9)


def test_grid_corner_sweep_conserves_and_converges():
    rng = np.random.default_rng(100)
    corners = np.array([[i0, r0, g] for i0 in (1.0, 1e7) for r0 in (0.7, 5.0) for g in (1e-6, 1e-2)])
    picks = corners[rng.integers(0, len(corners), size=100)]
    # jitter inside the corner's grid cell
    i0 = np.clip(picks[:, 0] * 10 ** rng.uniform(-0.5, 0.5, 100), 1.0, 1e7)
    r0 = np.clip(picks[:, 1] + rng.uniform(-0.3, 0.3, 100), 0.7, 5.0)
    gamma = np.clip(picks[:, 2] * 10 ** rng.uniform(-0.3, 0.3, 100), 1e-6, 1e-2)
    p2p = np.arange(100) % 2 == 0
    s0 = np.full(100, 1e7)
    beta_p2p = np.where(p2p, r0 * gamma / s0, 0.0)
    beta_cs = np.where(p2p, 0.0, r0 * gamma)
    population = s0 + i0

    coarse = integrate_batch(s0, i0, 0.0, beta_p2p, beta_cs, gamma, 365, step_days=0.05)
    fine = integrate_batch(s0, i0, 0.0, beta_p2p, beta_cs, gamma, 365, step_days=0.025)
    assert not coarse.failed.any()
    drift = np.abs(coarse.s + coarse.i + coarse.r - population) / population
    assert drift.max() <= 1e-6
    for a, b in ((coarse.s, fine.s), (coarse.i, fine.i), (coarse.r, fine.r)):
        assert (np.abs(a - b) / population).max() < 1e-6
