import numpy as np
import pandas as pd
import pytest

from config.config_manager import DEFAULT_CORPUS_CONFIG
from epidemic import IncidenceSeries, InfectionMode
from epidemic.simulator import template_total
from errors import FitFailureError, ParameterDomainError, UndefinedCorrelationError
from services.dictionary_service import build_dictionary, build_grid
from services.prediction_service import overshoot_by_mode, predict_susceptible, prediction_spearman
from services.telemetry_service import generate_corpus, ground_truth

P2P_ENTRY = 899
CS_ENTRY = 1099


def _head(dictionary, entry_id, days=31):
    return dictionary.get(entry_id).template.values[:days]


@pytest.mark.parametrize("entry_id", [P2P_ENTRY, CS_ENTRY])
def test_noiseless_template_predicts_its_total(dictionary, entry_id):
    entry = dictionary.get(entry_id)
    prediction = predict_susceptible(IncidenceSeries(_head(dictionary, entry_id)), dictionary)
    expected = template_total(entry.template.values, entry.params.population)
    assert prediction.alpha_scale == pytest.approx(1.0, rel=1e-6)
    assert prediction.predicted_total == pytest.approx(expected, rel=1e-3)
    assert not prediction.degenerate


def test_scaled_observation_scales_alpha(dictionary):
    entry = dictionary.get(P2P_ENTRY)
    prediction = predict_susceptible(IncidenceSeries(3.5 * _head(dictionary, P2P_ENTRY)), dictionary)
    assert prediction.alpha_scale == pytest.approx(3.5, rel=1e-6)
    assert prediction.predicted_total == pytest.approx(
        3.5 * template_total(entry.template.values, entry.params.population), rel=1e-6)


def test_scale_equivariance(dictionary):
    rng = np.random.default_rng(8)
    x = IncidenceSeries(_head(dictionary, P2P_ENTRY) * (1 + 0.05 * rng.standard_normal(31)).clip(0))
    base = predict_susceptible(x, dictionary)
    scaled = predict_susceptible(x.scaled(7.0), dictionary)
    assert scaled.fit.best_entry == base.fit.best_entry
    assert scaled.alpha_scale == pytest.approx(7.0 * base.alpha_scale, rel=1e-9)


def test_offset_modes(dictionary):
    entry = dictionary.get(CS_ENTRY)
    x = IncidenceSeries(2.0 * _head(dictionary, CS_ENTRY) + 5.0)
    once = predict_susceptible(x, dictionary, offset_mode="once")
    per_day = predict_susceptible(x, dictionary, offset_mode="per_day")
    total = template_total(entry.template.values, entry.params.population)
    assert once.offset == pytest.approx(5.0, rel=1e-6)
    assert once.predicted_total == pytest.approx(2.0 * total + 5.0, rel=1e-6)
    assert per_day.predicted_total > once.predicted_total


def test_prediction_never_below_observed(dictionary):
    rng = np.random.default_rng(21)
    for _ in range(5):
        x = IncidenceSeries(rng.poisson(50, 40).astype(float))
        prediction = predict_susceptible(x, dictionary)
        assert prediction.predicted_total >= x.values[:31].sum()


def test_negative_fit_is_degenerate():
    # only decaying CS templates, against a strictly rising observation
    cs_only = build_dictionary(build_grid(2), modes=[InfectionMode.CS], horizon_days=60)
    x = IncidenceSeries(np.arange(1.0, 41.0))
    prediction = predict_susceptible(x, cs_only)
    assert prediction.degenerate
    assert prediction.alpha_scale <= 0
    assert prediction.predicted_total == pytest.approx(sum(range(1, 32)))


def test_window_must_cover_five_days(dictionary):
    with pytest.raises(ParameterDomainError):
        predict_susceptible(IncidenceSeries(np.arange(1.0, 41.0)), dictionary, window=(0, 3))


def test_minimum_window_is_configurable(dictionary):
    x = IncidenceSeries(np.arange(1.0, 41.0))
    assert predict_susceptible(x, dictionary, window=(0, 9)).predicted_total > 0
    with pytest.raises(ParameterDomainError):
        predict_susceptible(x, dictionary, window=(0, 9), min_window_days=11)


def test_unknown_offset_mode(dictionary):
    with pytest.raises(ParameterDomainError):
        predict_susceptible(IncidenceSeries(np.arange(1.0, 41.0)), dictionary, offset_mode="twice")


def test_ranking_on_unvaccinated_corpus(dictionary):
    corpus = dict(DEFAULT_CORPUS_CONFIG, vaccination_probability=0.0)
    predicted, actual = [], []
    for scenario in generate_corpus(130, seed=130, corpus_config=corpus):
        observed = ground_truth(scenario).series.incidence
        # below the default ingest threshold
        if observed.total < 200:
            continue
        try:
            predicted.append(predict_susceptible(observed, dictionary).predicted_total)
        except (UndefinedCorrelationError, FitFailureError):
            continue
        actual.append(observed.total)

    assert len(actual) >= 100
    rho, p_value = prediction_spearman(predicted, actual)
    assert rho >= 0.7
    assert p_value < 0.01


def test_spearman_needs_three_pairs():
    with pytest.raises(ParameterDomainError):
        prediction_spearman([1.0, 2.0], [1.0, 2.0])


def test_overshoot_by_mode():
    frame = pd.DataFrame({
        "mode": ["P2P", "P2P", "CS"],
        "predicted_total": [200.0, 300.0, 90.0],
        "observed_total": [100.0, 100.0, 100.0],
    })
    ratios = overshoot_by_mode(frame)
    assert ratios["P2P"] == pytest.approx(2.5)
    assert ratios["CS"] == pytest.approx(0.9)
