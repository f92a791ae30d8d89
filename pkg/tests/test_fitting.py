import numpy as np
import pytest

from epidemic import EpidemicParams, IncidenceSeries, InfectionMode, incidence_of, simulate
from errors import ParameterDomainError, UndefinedCorrelationError
from services.fitting_service import _best_in, cohens_kappa, cross_correlate, fit, mode_recovery_report

P2P, CS = InfectionMode.P2P, InfectionMode.CS

# r0 = 5, gamma = 1e-2 at the smallest (CS) and ninth (P2P) i0 grid point
CS_ENTRY = 1099
P2P_ENTRY = 899


def _cs_template(days=200):
    params = EpidemicParams.from_r0(CS, 1.0, 10.0, 0.01, 1e7 + 1)
    return incidence_of(simulate(params, horizon_days=days))


def test_self_correlation_is_one():
    d = _cs_template()
    lags = dict(cross_correlate(d, d, tau_max=5))
    assert lags[0] == pytest.approx(1.0, abs=1e-12)


def test_affine_invariance_of_correlation():
    d = _cs_template()
    x = d.scaled(4.0, 17.0)
    assert dict(cross_correlate(d, x))[0] == pytest.approx(1.0, abs=1e-12)


def test_shift_is_recovered():
    d = _cs_template()
    x = IncidenceSeries(np.concatenate([np.zeros(7), d.values]))
    lags = cross_correlate(d, x, tau_max=25)
    best_tau, best_c = max(lags, key=lambda item: item[1])
    assert best_tau == 7
    assert best_c == pytest.approx(1.0, abs=1e-6)


def test_symmetry_at_zero_lag():
    rng = np.random.default_rng(3)
    a = IncidenceSeries(rng.uniform(0, 10, 40))
    b = IncidenceSeries(rng.uniform(0, 10, 40))
    assert dict(cross_correlate(a, b))[0] == pytest.approx(dict(cross_correlate(b, a))[0], abs=1e-12)


def test_short_overlaps_are_omitted():
    d = IncidenceSeries([5.0, 4.0, 3.0, 2.0, 1.0])
    x = IncidenceSeries([1.0, 3.0, 2.0, 5.0, 4.0])
    taus = [tau for tau, _ in cross_correlate(d, x, tau_max=25)]
    assert taus == [0, 1, 2]


def test_constant_observation_is_undefined():
    with pytest.raises(UndefinedCorrelationError):
        cross_correlate(_cs_template(), IncidenceSeries(np.full(30, 4.0)))


def test_window_needs_three_points(dictionary):
    with pytest.raises(ParameterDomainError):
        fit(IncidenceSeries(np.arange(10.0)), dictionary, window=(0, 1))


@pytest.mark.parametrize("entry_id, mode", [(CS_ENTRY, CS), (P2P_ENTRY, P2P)])
def test_dictionary_self_identification(dictionary, entry_id, mode):
    entry = dictionary.get(entry_id)
    result = fit(entry.template, dictionary)
    assert result.mode is mode
    assert result.best_entry == entry_id
    assert result.lag_tau == 0
    assert result.correlation >= 1 - 1e-9
    np.testing.assert_allclose(result.fitted_template, entry.template.values, rtol=1e-12)


def test_every_entry_identifies_itself(dictionary):
    for entry in dictionary:
        result = fit(entry.template, dictionary)
        chosen = result.entry.params
        assert result.mode is entry.mode, entry.entry_id
        assert result.lag_tau == 0, entry.entry_id
        assert result.correlation >= 1 - 1e-9, entry.entry_id
        # scale-free matching cannot separate templates that differ only by a factor (CS twins,
        # subcritical P2P seeded far below S0), so only i0 may differ
        assert (chosen.r0, chosen.gamma) == (entry.params.r0, entry.params.gamma), entry.entry_id


def test_ties_within_rounding_prefer_smaller_lag_then_entry():
    almost_one = 1.0 - 4e-16
    matrix = np.array([[0.5, 0.9], [almost_one, 1.0]])
    assert _best_in(matrix, np.array([7, 3])) == (3, almost_one, 0)
    matrix = np.array([[1.0, np.nan], [1.0, 1.0]])
    assert _best_in(matrix, np.array([9, 2])) == (2, 1.0, 0)
    # a real gap is not a tie
    assert _best_in(np.array([[1.0 - 1e-9, 1.0]]), np.array([5])) == (5, 1.0, 1)


def test_fit_reports_window(dictionary):
    x = IncidenceSeries(dictionary.get(P2P_ENTRY).template.values[:120])
    result = fit(x, dictionary, window=(0, 30))
    assert result.window == (0, 30)
    assert 0 <= result.lag_tau <= 25
    assert result.correlation == max(best.correlation for best in result.per_mode_best.values())


def test_fit_is_affine_invariant(dictionary):
    rng = np.random.default_rng(11)
    template = dictionary.get(P2P_ENTRY).template.values[:90]
    x = IncidenceSeries(template * (1 + 0.05 * rng.standard_normal(90)).clip(0))
    base = fit(x, dictionary)
    moved = fit(x.scaled(3.0, 2.0), dictionary)
    assert (moved.best_entry, moved.lag_tau) == (base.best_entry, base.lag_tau)
    assert moved.correlation == pytest.approx(base.correlation, abs=1e-12)


def test_parallel_fit_matches_serial(dictionary):
    x = IncidenceSeries(dictionary.get(CS_ENTRY).template.values[:60] + 3.0)
    serial = fit(x, dictionary)
    parallel = fit(x, dictionary, jobs=4)
    assert (serial.best_entry, serial.lag_tau, serial.correlation) == \
        (parallel.best_entry, parallel.lag_tau, parallel.correlation)


def test_noise_does_not_raise_best_correlation(dictionary):
    template = dictionary.get(P2P_ENTRY).template.values[:60]
    clean = fit(IncidenceSeries(template), dictionary).correlation
    rng = np.random.default_rng(5)
    for _ in range(5):
        noisy = template * (1 + 0.1 * rng.standard_normal(60)).clip(0)
        assert fit(IncidenceSeries(noisy), dictionary).correlation <= clean


def _observed(params, days, rng, noise=0.05):
    values = incidence_of(simulate(params, horizon_days=days)).values
    return IncidenceSeries(values * (1 + noise * rng.standard_normal(days)).clip(0))


def test_mode_recovered_on_synthetic_ensemble(dictionary):
    rng = np.random.default_rng(2019)
    truth, inferred = [], []
    for k in range(40):
        r0 = rng.uniform(3.0, 4.0)
        if k % 2 == 0:
            params = EpidemicParams.from_r0(P2P, 10.0, r0, rng.uniform(0.007, 0.01), 1e6)
        else:
            params = EpidemicParams.from_r0(CS, 5.0, r0, rng.uniform(0.008, 0.01), 1e5)
        truth.append(params.mode)
        inferred.append(fit(_observed(params, 90, rng), dictionary).mode)

    report = mode_recovery_report(inferred, truth)
    assert report["n"] == 40
    assert report["accuracy"] >= 0.9


def test_kappa_perfect_agreement():
    labels = [P2P, CS, CS, P2P, CS]
    agreement = cohens_kappa(labels, labels)
    assert agreement.kappa == pytest.approx(1.0)
    assert agreement.observed_agreement == 1.0
    assert not agreement.degenerate


def test_kappa_chance_agreement():
    agreement = cohens_kappa([P2P, P2P, CS, CS], [P2P, CS, P2P, CS])
    assert agreement.observed_agreement == pytest.approx(0.5)
    assert agreement.kappa == pytest.approx(0.0)


def test_kappa_expert_confusion_structure():
    # all six P2P labels agree; five of twelve CS labels are called P2P
    expert = [P2P] * 6 + [CS] * 12
    model = [P2P] * 6 + [P2P] * 5 + [CS] * 7
    agreement = cohens_kappa(expert, model)
    assert agreement.n == 18
    assert agreement.kappa == pytest.approx(0.48, abs=0.05)


def test_kappa_excluding_items():
    expert = [P2P] * 6 + [CS] * 12
    model = [P2P] * 6 + [P2P] * 5 + [CS] * 7
    exclude = [False] * 6 + [True] * 2 + [False] * 10
    assert cohens_kappa(expert, model, exclude=exclude).kappa > cohens_kappa(expert, model).kappa


def test_kappa_degenerate_raters():
    same = cohens_kappa([CS, CS, CS], [CS, CS, CS])
    assert same.degenerate and same.kappa == 1.0
    different = cohens_kappa([CS, CS], [P2P, P2P])
    assert different.degenerate and different.kappa == 0.0


def test_kappa_length_mismatch():
    with pytest.raises(ParameterDomainError):
        cohens_kappa([CS], [CS, P2P])
