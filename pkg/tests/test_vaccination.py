import numpy as np
import pytest

from config.config_manager import DEFAULT_CORPUS_CONFIG
from epidemic import IncidenceSeries
from errors import FeatureExtractionError, InsufficientDataError, ParameterDomainError
from services.survival_analysis import fit_cox
from services.telemetry_service import generate_corpus, ground_truth
from services.vaccination_service import (FEATURE_NAMES, VaccinationOutcome, build_dataset, build_outcome,
                                          cv_permutation_test, eradication_split_analysis, extract_features,
                                          feature_window, fit_regression_tree, permutation_importance,
                                          time_to_termination)


def _series(values):
    return IncidenceSeries(np.asarray(values, dtype=float))


@pytest.mark.parametrize("values, expected", [
    ([100.0] + [0.0] * 30, (0, False)),
    ([1.0] * 100, (98, True)),
    ([50.0, 49.0, 1.0], (1, True)),
])
def test_time_to_termination(values, expected):
    assert time_to_termination(_series(values)) == expected


def test_trailing_zeros_do_not_move_termination():
    base = [5.0, 9.0, 12.0, 7.0, 3.0, 1.0]
    t_short, _ = time_to_termination(_series(base + [0.0] * 14))
    t_long, censored = time_to_termination(_series(base + [0.0] * 60))
    assert t_short == t_long == 5
    assert not censored


def test_short_quiet_tail_is_censored():
    _, censored = time_to_termination(_series([5.0, 9.0, 12.0] + [0.0] * 13))
    assert censored


def test_all_zero_series_has_no_termination():
    with pytest.raises(ParameterDomainError):
        time_to_termination(_series(np.zeros(20)))


def test_build_outcome():
    x = _series([10.0, 20.0, 30.0, 5.0] + [0.0] * 30)
    outcome = build_outcome("m1", x, vaccination_day=1, predicted_susceptible=100.0)
    assert outcome.infected_at_vax == 30.0
    assert outcome.fraction_infected_at_vax == pytest.approx(0.3)
    assert outcome.t_term == 3
    assert not outcome.censored
    capped = build_outcome("m1", x, vaccination_day=2, predicted_susceptible=10.0)
    assert capped.fraction_infected_at_vax == 1.0


def test_censored_outcome_runs_to_series_end():
    outcome = build_outcome("m2", _series(np.ones(50)), vaccination_day=10, predicted_susceptible=500.0)
    assert outcome.censored
    assert outcome.t_term == 49


@pytest.mark.parametrize("vaccination_day, window", [(10, (0, 10)), (400, (0, 30)), (30, (0, 30))])
def test_feature_window(vaccination_day, window):
    assert feature_window(vaccination_day) == window


def test_early_vaccination_cannot_be_featurized(small_dictionary):
    x = _series(np.arange(1.0, 60.0))
    with pytest.raises(FeatureExtractionError) as info:
        extract_features(x, small_dictionary, vaccination_day=2, malware_id="early")
    assert info.value.malware_id == "early"


def test_features_of_a_dictionary_template(small_dictionary):
    entry = small_dictionary.get(int(small_dictionary.entry_ids[-1]))
    features = extract_features(entry.template.scaled(0.001), small_dictionary, vaccination_day=40)
    assert features.to_array().shape == (len(FEATURE_NAMES),)
    assert features.fit_cs == pytest.approx(1.0, abs=1e-9)
    assert -1.0 <= features.fit_p2p <= 1.0
    assert features.beta_best == pytest.approx(entry.params.beta)


def test_build_dataset_counts_exclusions(small_dictionary):
    good = small_dictionary.get(int(small_dictionary.entry_ids[-1])).template.scaled(0.001)
    silent_start = _series(np.concatenate([np.zeros(40), np.arange(1.0, 41.0)]))
    dataset = build_dataset([
        ("good", good, 40),
        ("unvaccinated", good, None),
        ("early", good, 2),
        ("silent", silent_start, 35),
    ], small_dictionary)

    assert dataset.malware_ids == ["good"]
    assert set(dataset.excluded) == {"unvaccinated", "early", "silent"}
    assert dataset.feature_matrix().shape == (1, len(FEATURE_NAMES))
    assert list(dataset.outcomes_frame()["malware_id"]) == ["good"]
    assert list(dataset.features_frame().columns) == ["malware_id", *FEATURE_NAMES]


def _driven_data(n=100, seed=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, (n, len(FEATURE_NAMES)))
    y = 200.0 * x[:, 0] + 50.0 * x[:, 1] + rng.normal(0.0, 2.0, n)
    return x, y


def test_tree_needs_twenty_samples():
    x, y = _driven_data(n=19)
    with pytest.raises(InsufficientDataError):
        fit_regression_tree(x, y)


def test_tree_sample_minimum_is_configurable():
    x, y = _driven_data(n=12)
    result = fit_regression_tree(x, y, folds=3, min_samples=10)
    assert len(result.oof_predictions) == 12
    with pytest.raises(InsufficientDataError):
        fit_regression_tree(x, y, folds=3, min_samples=13)


def test_constant_targets_are_undefined():
    x, _ = _driven_data(n=40)
    result = fit_regression_tree(x, np.full(40, 7.0))
    assert result.undefined
    assert np.isnan(result.cv_spearman)
    assert result.tree.get_n_leaves() == 1


def test_tree_learns_driving_feature():
    x, y = _driven_data()
    result = fit_regression_tree(x, y, seed=5)
    assert not result.undefined
    assert result.cv_spearman >= 0.9
    assert result.oof_predictions.shape == (100,)
    again = fit_regression_tree(x, y, seed=5)
    np.testing.assert_array_equal(again.oof_predictions, result.oof_predictions)


def test_importance_ranks_driving_feature_first():
    x, y = _driven_data()
    result = fit_regression_tree(x, y, seed=5)
    ranking = permutation_importance(result.tree, x, y, repeats=10, seed=5)
    assert ranking[0][0] == FEATURE_NAMES[0]
    assert len(ranking) == len(FEATURE_NAMES)
    assert [value for _, value in ranking] == sorted((value for _, value in ranking), reverse=True)


def test_permutation_test_rejects_chance():
    x, y = _driven_data()
    rho, p_value = cv_permutation_test(x, y, n_permutations=49, seed=5)
    assert rho >= 0.9
    assert p_value == pytest.approx(0.02)


def _outcome(k, fraction, t_term):
    return VaccinationOutcome(f"m{k}", 10, fraction * 100, 100.0, fraction, t_term, False)


def test_split_analysis_sides():
    below = [_outcome(k, f, 50) for k, f in enumerate([0.1, 0.2, 0.3, 0.4, 0.5])]
    above = [_outcome(10 + k, f, t) for k, (f, t) in enumerate([(0.7, 120), (0.8, 130), (0.9, 140)])]
    report = eradication_split_analysis(below + above)

    assert report.below.n == 5 and report.above.n == 3
    assert report.below.r_squared == 0.0 and report.below.p_value == 1.0
    assert report.above.r_squared == pytest.approx(1.0)
    assert report.above.slope == pytest.approx(100.0)
    assert report.ratio == pytest.approx(130.0 / 50.0)
    assert set(report.plot_data["side"]) == {"below", "above"}
    assert report.summary()["ratio"] == report.ratio


def test_threshold_value_falls_above():
    outcomes = [_outcome(0, 0.6, 80), _outcome(1, 0.59, 40)]
    report = eradication_split_analysis(outcomes)
    assert report.above.n == 1 and report.below.n == 1
    assert report.ratio == pytest.approx(2.0)


def test_empty_side_has_no_ratio():
    report = eradication_split_analysis([_outcome(k, 0.1 * (k + 1), 30 + k) for k in range(4)])
    assert report.above.empty
    assert report.above.mean_t_term is None
    assert report.ratio is None


def test_phase_transition_corpus():
    below = [_outcome(k, f, 50 + 2 * (-1) ** k) for k, f in enumerate(np.linspace(0.05, 0.59, 60))]
    above = [_outcome(100 + k, f, 50 + 400 * (f - 0.6) + 2 * (-1) ** k)
             for k, f in enumerate(np.linspace(0.6, 0.95, 40))]
    report = eradication_split_analysis(below + above)

    assert report.below.n == 60 and report.above.n == 40
    assert report.below.r_squared <= 0.1
    assert report.above.r_squared >= 0.8
    assert report.ratio > 2


@pytest.fixture(scope="module")
def corpus_dataset(dictionary):
    """Vaccination dataset from 200 scenarios drawn with the bundled corpus defaults"""
    series = []
    for scenario in generate_corpus(200, seed=188, corpus_config=DEFAULT_CORPUS_CONFIG):
        truth = ground_truth(scenario).series
        # same threshold as ingest
        if truth.incidence.total >= 200:
            series.append((truth.file_id, truth.incidence, truth.vaccination_day))
    return build_dataset(series, dictionary)


def test_corpus_infected_at_vaccination_slows_termination(corpus_dataset):
    dataset = corpus_dataset
    assert len(dataset.outcomes) >= 150
    model = fit_cox(dataset.feature_matrix(), [o.t_term for o in dataset.outcomes],
                    [o.censored for o in dataset.outcomes], FEATURE_NAMES)
    assert model.hazard_ratios[FEATURE_NAMES.index("log_infected_at_vax")] < 1


def test_corpus_tree_beats_permuted_targets(corpus_dataset):
    dataset = corpus_dataset
    keep = [k for k, o in enumerate(dataset.outcomes) if not o.censored]
    x = dataset.feature_matrix()[keep]
    y = [dataset.outcomes[k].t_term for k in keep]
    rho, p_value = cv_permutation_test(x, y, n_permutations=499, seed=0)
    assert rho > 0
    assert p_value < 0.01
