"""
Malware Spread Analyzer command line.

    python main.py dict-build --out output/dictionary
    python main.py synth-gen --out output/corpus
    python main.py ingest --events output/corpus/events.csv --out output/series
    python main.py fit --ground-truth output/corpus/ground_truth.csv
    python main.py predict
    python main.py vaccine-analyze
    python main.py report --predictions output/predict/predictions.csv --outcomes output/vaccination/outcomes.csv
"""

import argparse
import logging
import sys
from datetime import date
from pathlib import Path
from typing import List, Optional, Sequence

from app_settings import settings
from config.config_manager import ConfigurationManager
from errors import MalspreadError, UsageError
from services.run_ledger import RunLedger
from workflows.commands import PipelineCommands
from workflows.state import PipelineStep, RunConfig

logger = logging.getLogger(__name__)

OUTPUT = Path(settings.OUTPUT_DIR)
DEFAULT_OUT = {
    PipelineStep.DICT_BUILD: OUTPUT / "dictionary",
    PipelineStep.SYNTH_GEN: OUTPUT / "corpus",
    PipelineStep.INGEST: OUTPUT / "series",
    PipelineStep.FIT: OUTPUT / "fit",
    PipelineStep.PREDICT: OUTPUT / "predict",
    PipelineStep.VACCINE_ANALYZE: OUTPUT / "vaccination",
    PipelineStep.REPORT: OUTPUT / "report",
}
INPUT_FLAGS = ("events", "series", "dictionary", "ground_truth", "predictions", "outcomes")


class _ArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so bad flags map to the usage exit code"""

    def error(self, message):
        raise UsageError(message)


def _add_common(parser: argparse.ArgumentParser, step: PipelineStep) -> None:
    parser.add_argument("--out", default=str(DEFAULT_OUT[step]), help="output directory")
    parser.add_argument("--seed", type=int, help="seed for every randomized step")
    parser.add_argument("--jobs", type=int, help="worker threads for per-malware stages")
    parser.add_argument("--config-dir", default=settings.CONFIG_DIR, help="directory holding the JSON configuration")
    parser.add_argument("--no-ledger", action="store_true", help="do not record the run in the run database")


def _add_sources(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--series", default=str(DEFAULT_OUT[PipelineStep.INGEST]), help="ingested series directory")
    parser.add_argument("--dictionary", default=str(DEFAULT_OUT[PipelineStep.DICT_BUILD]), help="dictionary directory")
    parser.add_argument("--tau-max", type=int, help="largest lag in days (default 25)")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="malspread", description=settings.PROJECT_NAME)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("dict-build", help="simulate the template dictionary")
    _add_common(p, PipelineStep.DICT_BUILD)
    p.add_argument("--grid-points", type=int, help="points per grid axis (default 10)")
    p.add_argument("--horizon-days", type=int, help="template length in days (default 730)")
    p.add_argument("--step-days", type=float, help="integration step in days (default 0.05)")
    p.add_argument("--modes", nargs="+", choices=["P2P", "CS"], help="infection modes to include")

    p = commands.add_parser("synth-gen", help="generate a synthetic telemetry corpus with ground truth")
    _add_common(p, PipelineStep.SYNTH_GEN)
    p.add_argument("--scenarios", type=int, help="number of scenarios (default from corpus_config.json)")
    p.add_argument("--no-noise", action="store_true", help="deterministic counts instead of the Poisson chain")
    p.add_argument("--start-date", type=date.fromisoformat, help="calendar date of day 0")

    p = commands.add_parser("ingest", help="aggregate telemetry events into daily incidence series")
    _add_common(p, PipelineStep.INGEST)
    p.add_argument("--events", default=str(DEFAULT_OUT[PipelineStep.SYNTH_GEN] / "events.csv"), help="event CSV")
    p.add_argument("--min-machines", type=int, help="minimum distinct machines per file (default 200)")
    p.add_argument("--max-reject-fraction", type=float, help="fail when more rows are rejected (default 0.10)")
    p.add_argument("--observation-end", type=date.fromisoformat, help="pad every series to this date (default: last scan date in the input)")
    p.add_argument("--chunk-rows", type=int, help="rows per streamed chunk")

    p = commands.add_parser("fit", help="match series against the dictionary and classify the mode")
    _add_common(p, PipelineStep.FIT)
    _add_sources(p)
    p.add_argument("--fit-window-days", type=int,
                   help="last day of the fit window, inclusive (default: the whole series, cut at vaccination)")
    p.add_argument("--ground-truth", help="ground truth CSV for a mode recovery report")

    p = commands.add_parser("predict", help="predict the susceptible population of each series")
    _add_common(p, PipelineStep.PREDICT)
    _add_sources(p)
    p.add_argument("--fit-window-days", type=int, help="last day of the fit window (default 30)")
    p.add_argument("--offset-mode", choices=["once", "per_day"], help="how the affine offset enters the total")

    p = commands.add_parser("vaccine-analyze", help="time to termination, regression tree, Cox model and split")
    _add_common(p, PipelineStep.VACCINE_ANALYZE)
    _add_sources(p)
    p.add_argument("--termination-fraction", type=float, help="share of infections defining termination (default 0.99)")
    p.add_argument("--quiet-days", type=int, help="trailing zero days required to count as terminated (default 14)")
    p.add_argument("--split-threshold", type=float, help="fraction infected at vaccination to split on (default 0.6)")
    p.add_argument("--cv-folds", type=int, help="cross validation folds (default 10)")
    p.add_argument("--permutations", type=int, default=199, help="permutations for the CV significance test")

    p = commands.add_parser("report", help="figure plot data and SVG renderings")
    _add_common(p, PipelineStep.REPORT)
    p.add_argument("--predictions", help="predictions.csv from predict")
    p.add_argument("--outcomes", help="outcomes.csv from vaccine-analyze")
    p.add_argument("--split-threshold", type=float, help="fraction infected at vaccination to split on (default 0.6)")
    p.add_argument("--no-svg", action="store_true", help="write plot data only")
    return parser


def _input_files(args: argparse.Namespace) -> List[Path]:
    files: List[Path] = []
    for flag in INPUT_FLAGS:
        value = getattr(args, flag, None)
        if not value:
            continue
        path = Path(value)
        files.extend(sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path])
    return files


def _overrides(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k in RunConfig.model_fields}


def run(argv: Optional[Sequence[str]] = None) -> int:
    ledger: Optional[RunLedger] = None
    try:
        args = build_parser().parse_args(argv)
        step = PipelineStep(args.command)
        config_manager = ConfigurationManager(args.config_dir)
        config = RunConfig.resolve(config_manager, _overrides(args))
        ledger = RunLedger(step.value, config.echo(), args.out, _input_files(args),
                           record_database=not args.no_ledger)
        PipelineCommands(config, config_manager, ledger).dispatch(step, args)
        manifest = ledger.finish(0)
        logger.info(f"✅ {step.value} finished; manifest at {manifest}")
        return 0
    except MalspreadError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        if ledger is not None:
            ledger.finish(e.exit_code, str(e))
        return e.exit_code


def main() -> None:
    logging.basicConfig(level=settings.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
