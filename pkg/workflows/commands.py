"""
Pipeline commands: one method per CLI subcommand, each reading its inputs,
running the services and registering every written file with the run ledger
"""

import json
import logging
from argparse import Namespace
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from config.config_manager import ConfigurationManager
from epidemic.state import InfectionMode
from errors import (FitFailureError, InputError, MalspreadError,
                    ParameterDomainError, UndefinedCorrelationError)
from services.dictionary_service import build_dictionary, build_grid, load_dictionary, save_dictionary
from services.fitting_service import fit, fits_to_frame, mode_recovery_report
from services.prediction_service import (PREDICTION_COLUMNS, overshoot_by_mode, predict_susceptible,
                                         prediction_spearman)
from services.report_service import prediction_plot_data, write_report
from services.run_ledger import RunLedger
from services.survival_analysis import fit_cox, hazard_report
from services.telemetry_service import (MalwareSeries, generate_corpus, ingest_csv, load_ground_truth,
                                        load_series, save_series, write_corpus)
from services.vaccination_service import (FEATURE_NAMES, OUTCOME_COLUMNS, VaccinationOutcome, build_dataset,
                                          cv_permutation_test, eradication_split_analysis,
                                          fit_regression_tree, permutation_importance)
from workflows.state import PipelineStep, RunConfig

logger = logging.getLogger(__name__)

# Per-malware failures that exclude one series without failing the run
SERIES_FAILURES = (UndefinedCorrelationError, FitFailureError, ParameterDomainError)
# Columns of predictions.csv the report reads
PLOT_COLUMNS = ["malware_id", "mode", "predicted_total", "observed_total"]


def _write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


class PipelineCommands:
    def __init__(self, config: RunConfig, config_manager: ConfigurationManager, ledger: RunLedger):
        self.config = config
        self.config_manager = config_manager
        self.ledger = ledger

    def _map_series(self, series: Sequence[MalwareSeries], task: Callable[[MalwareSeries], Any]) -> List[Tuple[MalwareSeries, Any]]:
        """Run task per series across the worker pool; results keep input order, failures are None"""

        def guarded(item: MalwareSeries):
            try:
                return task(item)
            except SERIES_FAILURES as e:
                logger.warning(f"⚠️ Skipping {item.file_id}: {e}")
                return None

        if self.config.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                results = list(pool.map(guarded, series))
        else:
            results = [guarded(item) for item in series]
        return list(zip(series, results))

    def _load_series(self, directory: str) -> List[MalwareSeries]:
        series = load_series(directory)
        if not series:
            raise InputError("no series passed filters")
        return series

    # --- dict-build ----------------------------------------------------------------------------
    def dict_build(self, args: Namespace) -> None:
        cfg = self.config
        with self.ledger.stage("build"):
            dictionary = build_dictionary(
                build_grid(cfg.grid_points),
                modes=[InfectionMode(m) for m in cfg.modes],
                horizon_days=cfg.horizon_days,
                step_days=cfg.step_days,
                susceptible_at_start=cfg.susceptible_at_start,
                min_template_total=cfg.min_template_total,
                min_template_spread=cfg.min_template_spread,
                undershoot_tolerance=cfg.undershoot_tolerance,
                jobs=cfg.jobs,
            )
        with self.ledger.stage("save"):
            self.ledger.add_artifacts(save_dictionary(dictionary, args.out))
        self.ledger.note("entries", len(dictionary))
        self.ledger.note("skipped", dictionary.skipped)

    # --- synth-gen -----------------------------------------------------------------------------
    def synth_gen(self, args: Namespace) -> None:
        corpus_config = self.config_manager.corpus_config
        n = args.scenarios or int(corpus_config["scenarios"])
        scenarios = generate_corpus(n, self.config.seed, corpus_config,
                                    start_date=self.config.start_date, noisy=not args.no_noise)
        with self.ledger.stage("generate"):
            paths, truths = write_corpus(scenarios, args.out)
        self.ledger.add_artifacts(paths)
        self.ledger.note("scenarios", len(truths))
        self.ledger.note("corpus_config", corpus_config)
        self.ledger.note("events", int(sum(t.series.machine_total for t in truths)))

    # --- ingest --------------------------------------------------------------------------------
    def ingest(self, args: Namespace) -> None:
        cfg = self.config
        with self.ledger.stage("ingest"):
            report = ingest_csv(args.events, min_machines=cfg.min_machines,
                                max_reject_fraction=cfg.max_reject_fraction,
                                observation_end=cfg.observation_end, chunk_rows=cfg.chunk_rows)
        out = Path(args.out)
        self.ledger.add_artifacts(save_series(report.series, out))
        rejections = pd.DataFrame([{"line": r.line, "reason": r.reason} for r in report.rejections],
                                  columns=["line", "reason"])
        rejections_path = out / "rejections.csv"
        rejections.to_csv(rejections_path, index=False)
        self.ledger.add_artifacts([rejections_path])
        self.ledger.note("rows_read", report.rows_read)
        self.ledger.note("rows_rejected", len(report.rejections))
        self.ledger.note("files_seen", report.files_seen)
        self.ledger.note("series_kept", len(report.series))

    # --- fit -----------------------------------------------------------------------------------
    def fit(self, args: Namespace) -> None:
        cfg = self.config
        series = self._load_series(args.series)
        dictionary = load_dictionary(args.dictionary)

        def task(item: MalwareSeries):
            window = fit_window(item, args.fit_window_days, cfg.min_window_days)
            return fit(item.incidence, dictionary, window=window, tau_max=cfg.tau_max,
                       min_overlap=cfg.min_overlap)

        with self.ledger.stage("fit"):
            results = [(item, result) for item, result in self._map_series(series, task) if result is not None]
        self._require_survivors(results, len(series))

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fits_path = out / "fits.csv"
        fits_to_frame([result.to_row(item.file_id) for item, result in results]).to_csv(
            fits_path, index=False, float_format="%.17g")
        self.ledger.add_artifacts([fits_path])

        if args.ground_truth:
            truth = load_ground_truth(args.ground_truth).set_index("file_id")["mode"]
            try:
                matched = [(InfectionMode(truth[item.file_id]), result.mode)
                           for item, result in results if item.file_id in truth.index]
            except ValueError as e:
                raise InputError(f"{args.ground_truth} holds an unknown mode: {e}") from e
            if matched:
                report = mode_recovery_report([m for _, m in matched], [t for t, _ in matched])
                self.ledger.add_artifacts([_write_json(out / "mode_recovery.json", report)])
                logger.info(f"🎯 Mode recovery: accuracy {report['accuracy']:.3f}, kappa {report['kappa']:.3f}")

    # --- predict -------------------------------------------------------------------------------
    def predict(self, args: Namespace) -> None:
        cfg = self.config
        series = self._load_series(args.series)
        dictionary = load_dictionary(args.dictionary)

        def task(item: MalwareSeries):
            window = fit_window(item, cfg.fit_window_days, cfg.min_window_days)
            return predict_susceptible(item.incidence, dictionary, window=window,
                                       tau_max=cfg.tau_max, offset_mode=cfg.offset_mode,
                                       early_stop_fraction=cfg.early_stop_fraction,
                                       min_window_days=cfg.min_window_days, min_overlap=cfg.min_overlap)

        with self.ledger.stage("predict"):
            results = [(item, result) for item, result in self._map_series(series, task) if result is not None]
        self._require_survivors(results, len(series))

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame([result.to_row(item.file_id, item.incidence.total) for item, result in results],
                             columns=PREDICTION_COLUMNS)
        predictions_path = out / "predictions.csv"
        frame.to_csv(predictions_path, index=False, float_format="%.17g")
        plot_path = out / "prediction_plot.csv"
        prediction_plot_data(frame["malware_id"], frame["predicted_total"], frame["observed_total"],
                             frame["mode"]).to_csv(plot_path, index=False, float_format="%.17g")
        self.ledger.add_artifacts([predictions_path, plot_path])

        if len(frame) >= 3:
            rho, p_value = prediction_spearman(frame["predicted_total"], frame["observed_total"])
            evaluation = {"spearman_rho": rho, "p_value": p_value, "n": len(frame),
                          "median_ratio_by_mode": overshoot_by_mode(frame),
                          "degenerate": int(sum(result.degenerate for _, result in results))}
            self.ledger.add_artifacts([_write_json(out / "prediction_eval.json", evaluation)])
            logger.info(f"📈 Prediction Spearman rho = {rho:.3f} (p = {p_value:.2g}, n = {len(frame)})")

    # --- vaccine-analyze -----------------------------------------------------------------------
    def vaccine_analyze(self, args: Namespace) -> None:
        cfg = self.config
        series = self._load_series(args.series)
        dictionary = load_dictionary(args.dictionary)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)

        with self.ledger.stage("features"):
            dataset = build_dataset([(s.file_id, s.incidence, s.vaccination_day) for s in series], dictionary,
                                    tau_max=cfg.tau_max, fit_window_days=cfg.fit_window_days,
                                    fraction=cfg.termination_fraction, quiet_days=cfg.quiet_days,
                                    offset_mode=cfg.offset_mode, min_window_days=cfg.min_window_days,
                                    min_overlap=cfg.min_overlap)
        self.ledger.note("analyzed", len(dataset.outcomes))
        self.ledger.note("excluded", len(dataset.excluded))
        if not dataset.outcomes:
            raise InputError("no series survived feature extraction")

        outcomes_path = out / "outcomes.csv"
        dataset.outcomes_frame().to_csv(outcomes_path, index=False, float_format="%.17g")
        features_path = out / "features.csv"
        dataset.features_frame().to_csv(features_path, index=False, float_format="%.17g")
        excluded_path = out / "excluded.csv"
        pd.DataFrame(sorted(dataset.excluded.items()), columns=["malware_id", "reason"]).to_csv(excluded_path, index=False)
        self.ledger.add_artifacts([outcomes_path, features_path, excluded_path])

        failures: List[MalspreadError] = []
        for name, analysis in (("tree", self._tree_analysis), ("cox", self._cox_analysis)):
            try:
                with self.ledger.stage(name):
                    analysis(dataset, out, args)
            except MalspreadError as e:
                logger.error(f"❌ {name} analysis failed: {e}")
                self.ledger.note(f"{name}_error", str(e))
                failures.append(e)

        split = eradication_split_analysis(dataset.outcomes, cfg.split_threshold)
        self.ledger.add_artifacts([_write_json(out / "split_report.json", split.summary())])
        if split.ratio is not None:
            logger.info(f"📊 Eradication split at {cfg.split_threshold}: mean ratio {split.ratio:.2f}")
        if len(failures) == 2:
            raise failures[0]

    def _tree_analysis(self, dataset, out: Path, args: Namespace) -> None:
        cfg = self.config
        keep = [k for k, o in enumerate(dataset.outcomes) if not o.censored]
        x = dataset.feature_matrix()[keep]
        y = [dataset.outcomes[k].t_term for k in keep]
        result = fit_regression_tree(x, y, folds=cfg.cv_folds, seed=cfg.seed,
                                     max_depth=cfg.tree_max_depth, min_leaf=cfg.tree_min_leaf,
                                     min_samples=cfg.min_samples)
        _, permutation_p = cv_permutation_test(x, y, n_permutations=args.permutations, folds=cfg.cv_folds,
                                               seed=cfg.seed, max_depth=cfg.tree_max_depth,
                                               min_leaf=cfg.tree_min_leaf)
        importance = permutation_importance(result.tree, x, y, repeats=cfg.importance_repeats, seed=cfg.seed)
        summary = {
            "n": len(y),
            "cv_spearman": None if result.undefined else result.cv_spearman,
            "cv_p_value": None if result.undefined else result.cv_p_value,
            "permutation_p_value": permutation_p,
            "undefined": result.undefined,
            "importance": [{"feature": name, "importance": value} for name, value in importance],
        }
        self.ledger.add_artifacts([_write_json(out / "tree_cv.json", summary)])
        logger.info(f"🌳 Regression tree: CV Spearman {result.cv_spearman:.3f} on {len(y)} malware")

    def _cox_analysis(self, dataset, out: Path, args: Namespace) -> None:
        cfg = self.config
        model = fit_cox(dataset.feature_matrix(), [o.t_term for o in dataset.outcomes],
                        [o.censored for o in dataset.outcomes], FEATURE_NAMES,
                        max_iter=cfg.cox_max_iter, tolerance=cfg.cox_tolerance,
                        min_samples=cfg.min_samples)
        model_path = out / "hazard_model.csv"
        model.to_frame().to_csv(model_path, index=False, float_format="%.17g")
        report_path = out / "hazard_report.txt"
        report_path.write_text(hazard_report(model), encoding="utf-8")
        self.ledger.add_artifacts([model_path, report_path])
        self.ledger.note("cox_converged", model.converged)

    # --- report --------------------------------------------------------------------------------
    def report(self, args: Namespace) -> None:
        prediction_data = None
        split = None
        if args.predictions:
            frame = _read_csv(args.predictions, PLOT_COLUMNS)
            try:
                prediction_data = prediction_plot_data(frame["malware_id"], frame["predicted_total"],
                                                       frame["observed_total"], frame["mode"])
            except (TypeError, ValueError) as e:
                raise InputError(f"{args.predictions} holds non-numeric totals: {e}") from e
        if args.outcomes:
            frame = _read_csv(args.outcomes, OUTCOME_COLUMNS)
            try:
                outcomes = [VaccinationOutcome(str(r.malware_id), int(r.vaccination_day), float(r.infected_at_vax),
                                               float(r.predicted_susceptible), float(r.fraction), int(r.t_term),
                                               bool(r.censored))
                            for r in frame.itertuples(index=False)]
            except (TypeError, ValueError) as e:
                raise InputError(f"{args.outcomes} holds a malformed outcome row: {e}") from e
            split = eradication_split_analysis(outcomes, self.config.split_threshold)
        if prediction_data is None and split is None:
            raise InputError("report needs --predictions and/or --outcomes")
        self.ledger.add_artifacts(write_report(args.out, prediction_data, split, svg=not args.no_svg))

    def _require_survivors(self, results: Sequence, total: int) -> None:
        self.ledger.note("series_total", total)
        self.ledger.note("series_failed", total - len(results))
        if not results:
            raise FitFailureError(f"none of the {total} series could be fitted")

    def dispatch(self, step: PipelineStep, args: Namespace) -> None:
        handlers = {
            PipelineStep.DICT_BUILD: self.dict_build,
            PipelineStep.SYNTH_GEN: self.synth_gen,
            PipelineStep.INGEST: self.ingest,
            PipelineStep.FIT: self.fit,
            PipelineStep.PREDICT: self.predict,
            PipelineStep.VACCINE_ANALYZE: self.vaccine_analyze,
            PipelineStep.REPORT: self.report,
        }
        logger.info(f"🚀 Running {step.value}")
        handlers[step](args)


def fit_window(item: MalwareSeries, last_day: Optional[int], min_window_days: int) -> Tuple[int, int]:
    """(0, last_day) inclusive like predict; the whole series by default.

    A series with a vaccination date is cut at that day unless fewer than min_window_days remain.
    """
    end = len(item.incidence) - 1
    if last_day is not None:
        end = min(end, last_day)
    if item.vaccination_day is not None and item.vaccination_day + 1 >= min_window_days:
        end = min(end, item.vaccination_day)
    return 0, end


def _read_csv(path: str, required: Sequence[str]) -> pd.DataFrame:
    if not Path(path).exists():
        raise InputError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype={"malware_id": str}, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"cannot parse {path}: {e}") from e
    missing = set(required) - set(frame.columns)
    if missing:
        raise InputError(f"{path} lacks columns {sorted(missing)}")
    return frame
