import numpy as np
import pytest

from errors import CollinearityError, InsufficientDataError
from services.survival_analysis import fit_cox, hazard_report


def _two_groups():
    # group A terminates twice as fast as group B
    durations = np.concatenate([np.arange(1, 31), 2 * np.arange(1, 31)]).astype(float)
    group = np.concatenate([np.ones(30), np.zeros(30)])[:, None]
    return group, durations, np.zeros(60, dtype=bool)


def _exponential(n=500, beta=1.0, seed=4):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 1))
    durations = rng.exponential(1.0 / np.exp(beta * x[:, 0]))
    return x, durations, np.zeros(n, dtype=bool)


def test_faster_group_has_positive_coefficient():
    x, t, censored = _two_groups()
    model = fit_cox(x, t, censored, ["group_a"])
    assert model.converged
    assert model.coefficients[0] > 0
    assert model.hazard_ratios[0] > 1


def test_recovers_exponential_hazard():
    x, t, censored = _exponential()
    model = fit_cox(x, t, censored, ["x"])
    assert model.coefficients[0] == pytest.approx(1.0, abs=0.15)
    assert model.p_values[0] < 1e-6
    np.testing.assert_allclose(model.hazard_ratios, np.exp(model.coefficients))


def test_censoring_is_respected():
    x, t, censored = _exponential(seed=9)
    censored = censored.copy()
    censored[::3] = True
    model = fit_cox(x, t, censored, ["x"])
    assert model.converged
    assert model.coefficients[0] > 0.5


def test_shifting_covariates_leaves_coefficients():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((80, 2))
    t = rng.exponential(1.0 / np.exp(0.8 * x[:, 0] - 0.5 * x[:, 1]))
    censored = np.zeros(80, dtype=bool)
    base = fit_cox(x, t, censored, ["a", "b"])
    moved = fit_cox(x + np.array([100.0, -3.0]), t, censored, ["a", "b"])
    np.testing.assert_allclose(moved.coefficients, base.coefficients, atol=1e-6)


def test_duplicated_covariate_is_collinear():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(40)
    c = rng.standard_normal(40)
    x = np.column_stack([a, 2.0 * a, c])
    t = rng.exponential(1.0, 40)
    with pytest.raises(CollinearityError) as info:
        fit_cox(x, t, np.zeros(40, dtype=bool), ["a", "a_twice", "c"])
    assert set(info.value.features) == {"a", "a_twice"}


def test_needs_twenty_samples():
    x, t, censored = _exponential(n=19)
    with pytest.raises(InsufficientDataError):
        fit_cox(x, t, censored, ["x"])


def test_sample_minimum_is_configurable():
    x, t, censored = _exponential(n=12)
    assert fit_cox(x, t, censored, ["x"], min_samples=10).coefficients.shape == (1,)
    with pytest.raises(InsufficientDataError):
        fit_cox(x, t, censored, ["x"], min_samples=13)


def test_needs_distinct_durations():
    x, _, censored = _exponential(n=30)
    with pytest.raises(InsufficientDataError):
        fit_cox(x, np.full(30, 5.0), censored, ["x"])


def test_needs_an_event():
    x, t, _ = _exponential(n=30)
    with pytest.raises(InsufficientDataError):
        fit_cox(x, t, np.ones(30, dtype=bool), ["x"])


def test_iteration_cap_reports_non_convergence():
    x, t, censored = _exponential()
    model = fit_cox(x, t, censored, ["x"], max_iter=1)
    assert not model.converged
    assert "NOT CONVERGED" in hazard_report(model)


def test_separated_data_is_flagged():
    # every x = 1 machine terminates before every x = 0 machine
    x = np.concatenate([np.ones(10), np.zeros(20)])[:, None]
    t = np.arange(1.0, 31.0)
    model = fit_cox(x, t, np.zeros(30, dtype=bool), ["separating"])
    assert model.anomalies == ["separating"]
    assert "!" in hazard_report(model)


def test_report_and_frame_layout():
    x, t, censored = _two_groups()
    model = fit_cox(x, t, censored, ["group_a"])
    report = hazard_report(model)
    header = report.splitlines()[0].split()
    assert header == ["Feature", "Coefficient", "Hazard", "SE", "p"]
    assert "group_a" in report
    frame = model.to_frame()
    assert list(frame["feature"]) == ["group_a"]
    assert not frame["anomaly"].any()
