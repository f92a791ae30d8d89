"""
Telemetry Service
Ingests first-seen telemetry events into per-malware daily incidence series and
generates stochastic synthetic telemetry with known ground truth
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from epidemic.simulator import integrate_batch, incidence_of, simulate_from
from epidemic.state import EpidemicParams, IncidenceSeries, InfectionMode
from errors import InputError, ParameterDomainError, ScenarioError

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ["machine_id", "file_id", "first_seen", "scan_time", "verdict", "signature_date"]
REQUIRED_COLUMNS = ["machine_id", "file_id", "first_seen", "scan_time", "verdict"]
SERIES_COLUMNS = ["file_id", "day", "incidence"]
SERIES_META_COLUMNS = ["file_id", "day0", "machine_total", "vaccination_day", "length"]
GROUND_TRUTH_COLUMNS = ["file_id", "mode", "i0", "r0", "gamma", "population", "beta_p2p",
                        "beta_cs", "vaccination_day", "gamma_post_vax", "block_prob",
                        "noise_seed", "observation_days", "day_offset", "total_infected"]

MIN_MACHINES = 200
MAX_REJECT_FRACTION = 0.10
MAX_EXPECTED_DAILY = 1e9
DATE_FORMAT = "%Y-%m-%d"
MALFORMED_ROW = "\x00malformed:"


class Verdict(Enum):
    CLEAN = "clean"
    MALWARE = "malware"


class TelemetryEvent(BaseModel):
    """One scan report: a machine on which a file was first seen"""

    model_config = ConfigDict(frozen=True)

    machine_id: str = Field(min_length=1)
    file_id: str = Field(min_length=1)
    first_seen: date
    scan_time: date
    verdict: Verdict
    signature_date: Optional[date] = None

    @model_validator(mode="after")
    def _first_seen_before_scan(self) -> "TelemetryEvent":
        if self.first_seen > self.scan_time:
            raise ValueError("first_seen is after scan_time")
        return self


@dataclass(frozen=True)
class MalwareSeries:
    file_id: str
    incidence: IncidenceSeries
    machine_total: int
    vaccination_day: Optional[int] = None
    day0: Optional[date] = None


@dataclass(frozen=True)
class RowRejection:
    line: int
    reason: str


@dataclass
class IngestReport:
    series: List[MalwareSeries]
    rejections: List[RowRejection] = field(default_factory=list)
    rows_read: int = 0
    files_seen: int = 0

    @property
    def reject_fraction(self) -> float:
        return len(self.rejections) / self.rows_read if self.rows_read else 0.0


def _validate_chunk(chunk: pd.DataFrame, first_line: int) -> Tuple[pd.DataFrame, List[RowRejection]]:
    """Parse one chunk of raw string rows; returns the valid rows and per-row rejections"""
    chunk = chunk.reset_index(drop=True)
    lines = first_line + np.arange(len(chunk))
    reasons = pd.Series("", index=chunk.index, dtype=object)

    if "machine_id" in chunk:
        marker = chunk["machine_id"].fillna("")
        malformed = marker.str.startswith(MALFORMED_ROW)
        field_counts = marker.str.slice(len(MALFORMED_ROW))
        reasons = reasons.mask(malformed, "wrong field count: " + field_counts + " fields")

    for column in REQUIRED_COLUMNS:
        if column not in chunk:
            raise InputError(f"telemetry file lacks required column '{column}'")
        missing = chunk[column].fillna("").str.strip() == ""
        reasons = reasons.mask(missing & (reasons == ""), f"missing {column}")

    first_seen = pd.to_datetime(chunk["first_seen"], format=DATE_FORMAT, errors="coerce")
    scan_time = pd.to_datetime(chunk["scan_time"], format=DATE_FORMAT, errors="coerce")
    signature_raw = chunk["signature_date"].fillna("") if "signature_date" in chunk else pd.Series("", index=chunk.index)
    signature = pd.to_datetime(signature_raw.where(signature_raw != ""), format=DATE_FORMAT, errors="coerce")
    verdict = chunk["verdict"].fillna("").str.strip().str.lower()

    reasons = reasons.mask(first_seen.isna() & (reasons == ""), "unparseable first_seen")
    reasons = reasons.mask(scan_time.isna() & (reasons == ""), "unparseable scan_time")
    reasons = reasons.mask((signature_raw != "") & signature.isna() & (reasons == ""), "unparseable signature_date")
    reasons = reasons.mask(~verdict.isin([v.value for v in Verdict]) & (reasons == ""), "unknown verdict")
    reasons = reasons.mask((first_seen > scan_time) & (reasons == ""), "first_seen after scan_time")

    bad = reasons != ""
    rejections = [RowRejection(int(lines[k]), reasons[k]) for k in np.nonzero(bad.to_numpy())[0]]
    valid = pd.DataFrame({
        "machine_id": chunk["machine_id"].str.strip(),
        "file_id": chunk["file_id"].str.strip(),
        "first_seen": first_seen,
        "scan_time": scan_time,
        "verdict": verdict,
        "signature_date": signature,
    })[~bad]
    return valid, rejections


def _build_series(pairs: pd.DataFrame, vaccinations: pd.Series, min_machines: int,
                  observation_end: pd.Timestamp) -> List[MalwareSeries]:
    series: List[MalwareSeries] = []
    for file_id, group in pairs.groupby("file_id", sort=True):
        machine_total = len(group)
        if machine_total < min_machines:
            logger.debug(f"Dropping {file_id}: {machine_total} machines < {min_machines}")
            continue
        day0 = group["first_seen"].min()
        days = (group["first_seen"] - day0).dt.days.to_numpy()
        length = max(int(days.max()) + 1, (observation_end - day0).days + 1)
        counts = np.bincount(days, minlength=length).astype(float)

        vaccination_day = None
        if file_id in vaccinations.index:
            vaccination_day = max(0, int((vaccinations[file_id] - day0).days))
        series.append(MalwareSeries(
            file_id=str(file_id),
            incidence=IncidenceSeries(counts, day0.date()),
            machine_total=machine_total,
            vaccination_day=vaccination_day,
            day0=day0.date(),
        ))
    return series


def ingest_frames(chunks: Iterable[pd.DataFrame], min_machines: int = MIN_MACHINES,
                  max_reject_fraction: float = MAX_REJECT_FRACTION,
                  observation_end: Optional[date] = None) -> IngestReport:
    """Streaming fold over raw event chunks (string columns).

    Every chunk row is one physical line after the header, so rejections carry file line numbers.
    """
    pair_parts: List[pd.DataFrame] = []
    vax_parts: List[pd.Series] = []
    rejections: List[RowRejection] = []
    rows_read = 0
    latest = pd.NaT

    for chunk in chunks:
        valid, rejected = _validate_chunk(chunk, first_line=rows_read + 2)
        rows_read += len(chunk)
        rejections.extend(rejected)
        if valid.empty:
            continue
        # valid rows have scan_time >= first_seen
        latest = valid["scan_time"].max() if pd.isna(latest) else max(latest, valid["scan_time"].max())
        # one row per (file, machine): the earliest first_seen
        pair_parts.append(valid.groupby(["file_id", "machine_id"], sort=False)["first_seen"].min().reset_index())
        flagged = valid[valid["verdict"] == Verdict.MALWARE.value]
        if not flagged.empty:
            marked = flagged["signature_date"].fillna(flagged["scan_time"])
            vax_parts.append(marked.groupby(flagged["file_id"]).min())

    for rejection in rejections[:20]:
        logger.warning(f"Rejected telemetry row {rejection.line}: {rejection.reason}")
    if len(rejections) > 20:
        logger.warning(f"... {len(rejections) - 20} more rejected rows")

    report = IngestReport(series=[], rejections=rejections, rows_read=rows_read)
    if rows_read and report.reject_fraction > max_reject_fraction:
        raise InputError(
            f"ingestion failed: {len(rejections)} of {rows_read} rows rejected "
            f"({report.reject_fraction:.1%} > {max_reject_fraction:.0%})"
        )
    if not pair_parts:
        return report

    pairs = pd.concat(pair_parts, ignore_index=True)
    pairs = pairs.groupby(["file_id", "machine_id"], sort=False)["first_seen"].min().reset_index()
    vaccinations = pd.concat(vax_parts).groupby(level=0).min() if vax_parts else pd.Series(dtype="datetime64[ns]")

    report.files_seen = int(pairs["file_id"].nunique())
    # without an explicit end every series runs to the last date in the file
    end = pd.Timestamp(observation_end) if observation_end is not None else latest
    report.series = _build_series(pairs, vaccinations, min_machines, end)
    logger.info(f"✅ Ingested {rows_read} rows: {report.files_seen} files seen, "
                f"{len(report.series)} passed the {min_machines}-machine filter, {len(rejections)} rows rejected")
    return report


def events_to_frame(events: Iterable[TelemetryEvent]) -> pd.DataFrame:
    rows = [{
        "machine_id": e.machine_id,
        "file_id": e.file_id,
        "first_seen": e.first_seen.isoformat(),
        "scan_time": e.scan_time.isoformat(),
        "verdict": e.verdict.value,
        "signature_date": e.signature_date.isoformat() if e.signature_date else "",
    } for e in events]
    return pd.DataFrame(rows, columns=EVENT_COLUMNS)


def ingest(events: Iterable[TelemetryEvent], min_machines: int = MIN_MACHINES,
           observation_end: Optional[date] = None) -> List[MalwareSeries]:
    """Per-file daily first-seen counts from validated events"""
    return ingest_frames([events_to_frame(events)], min_machines=min_machines,
                         observation_end=observation_end).series


def ingest_csv(path: Union[str, Path], min_machines: int = MIN_MACHINES,
               max_reject_fraction: float = MAX_REJECT_FRACTION,
               observation_end: Optional[date] = None,
               chunk_rows: int = 200_000) -> IngestReport:
    """Stream an event CSV in chunks"""
    path = Path(path)
    if not path.exists():
        raise InputError(f"telemetry file not found: {path}")

    try:
        width = len(pd.read_csv(path, dtype=str, nrows=0, encoding="utf-8").columns)

        # an over-long row stays in its chunk as a marker row so later line numbers hold
        def _bad_line(fields: List[str]) -> List[str]:
            return [f"{MALFORMED_ROW}{len(fields)}"] * width

        reader = pd.read_csv(path, dtype=str, keep_default_na=False, chunksize=chunk_rows,
                             engine="python", on_bad_lines=_bad_line, skip_blank_lines=False,
                             encoding="utf-8")
        return ingest_frames(reader, min_machines, max_reject_fraction, observation_end)
    except (pd.errors.ParserError, UnicodeDecodeError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot parse telemetry file {path}: {e}") from e


# --- series artifacts ----------------------------------------------------------------------

def save_series(series: List[MalwareSeries], directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    long_rows = []
    meta_rows = []
    for item in series:
        values = item.incidence.values
        long_rows.append(pd.DataFrame({"file_id": item.file_id, "day": np.arange(len(values)), "incidence": values}))
        meta_rows.append({
            "file_id": item.file_id,
            "day0": item.day0.isoformat() if item.day0 else "",
            "machine_total": item.machine_total,
            "vaccination_day": "" if item.vaccination_day is None else item.vaccination_day,
            "length": len(values),
        })
    frame = pd.concat(long_rows, ignore_index=True) if long_rows else pd.DataFrame(columns=SERIES_COLUMNS)
    series_path = directory / "series.csv"
    meta_path = directory / "series_meta.csv"
    frame.to_csv(series_path, index=False, float_format="%.17g")
    pd.DataFrame(meta_rows, columns=SERIES_META_COLUMNS).to_csv(meta_path, index=False)
    return [series_path, meta_path]


def load_series(directory: Union[str, Path]) -> List[MalwareSeries]:
    directory = Path(directory)
    series_path = directory / "series.csv"
    meta_path = directory / "series_meta.csv"
    if not series_path.exists() or not meta_path.exists():
        raise InputError(f"series artifacts not found in {directory}")
    frame = _read_table(series_path, SERIES_COLUMNS, dtype={"file_id": str}, float_precision="round_trip")
    meta = _read_table(meta_path, SERIES_META_COLUMNS, dtype={"file_id": str, "day0": str}, keep_default_na=False)

    grouped = {file_id: group for file_id, group in frame.groupby("file_id", sort=False)}
    loaded = []
    try:
        for row in meta.itertuples(index=False):
            group = grouped.get(row.file_id)
            values = np.zeros(int(row.length))
            if group is not None:
                values[group["day"].to_numpy(dtype=int)] = group["incidence"].to_numpy(dtype=float)
            day0 = date.fromisoformat(row.day0) if row.day0 else None
            vax = int(row.vaccination_day) if str(row.vaccination_day) != "" else None
            loaded.append(MalwareSeries(row.file_id, IncidenceSeries(values, day0), int(row.machine_total), vax, day0))
    except (IndexError, TypeError, ValueError) as e:
        raise InputError(f"malformed series artifacts in {directory}: {e}") from e
    return loaded


def _read_table(path: Path, required: List[str], **kwargs) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"cannot parse {path}: {e}") from e
    missing = set(required) - set(frame.columns)
    if missing:
        raise InputError(f"{path} lacks columns {sorted(missing)}")
    return frame


# --- synthetic generator -------------------------------------------------------------------

class SyntheticScenario(BaseModel):
    """A strain plus vaccination semantics and a noise seed"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    params: EpidemicParams
    vaccination_day: Optional[int] = Field(default=None, ge=0)
    gamma_post_vax: float = 0.1
    block_prob: float = Field(default=0.95, ge=0.0, le=1.0)
    noise_seed: int = 0
    observation_days: int = Field(default=365, ge=1)
    noisy: bool = True
    start_date: date = date(2019, 1, 1)

    @model_validator(mode="after")
    def _clearance_not_slower(self) -> "SyntheticScenario":
        if self.gamma_post_vax < self.params.gamma:
            raise ValueError("gamma_post_vax must be >= params.gamma")
        return self

    @property
    def file_id(self) -> str:
        """Content hash standing in for the file's SHA-1"""
        payload = json.dumps({
            "params": self.params.to_dict(),
            "vaccination_day": self.vaccination_day,
            "gamma_post_vax": self.gamma_post_vax,
            "block_prob": self.block_prob,
            "noise_seed": self.noise_seed,
            "observation_days": self.observation_days,
            "noisy": self.noisy,
        }, sort_keys=True)
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()

    @property
    def vaccinated_within_window(self) -> bool:
        return self.vaccination_day is not None and self.vaccination_day < self.observation_days


@dataclass(frozen=True)
class GroundTruth:
    series: MalwareSeries
    params: EpidemicParams
    scenario: SyntheticScenario
    day_offset: int

    def to_row(self) -> Dict[str, Any]:
        p = self.params
        return {
            "file_id": self.series.file_id,
            "mode": p.mode.value,
            "i0": p.i0,
            "r0": p.r0,
            "gamma": p.gamma,
            "population": p.population,
            "beta_p2p": p.beta_p2p,
            "beta_cs": p.beta_cs,
            "vaccination_day": "" if self.series.vaccination_day is None else self.series.vaccination_day,
            "gamma_post_vax": self.scenario.gamma_post_vax,
            "block_prob": self.scenario.block_prob,
            "noise_seed": self.scenario.noise_seed,
            "observation_days": self.scenario.observation_days,
            "day_offset": self.day_offset,
            "total_infected": int(self.series.incidence.total),
        }


def expected_incidence(scenario: SyntheticScenario) -> np.ndarray:
    """Deterministic daily infections; after vaccination blocked attempts leave machines immune"""
    p = scenario.params
    days = scenario.observation_days
    if not scenario.vaccinated_within_window or scenario.vaccination_day >= days - 1:
        return incidence_of(simulate_from(p.susceptible_at_start, p.i0, 0.0, p.beta_p2p,
                                          p.beta_cs, p.gamma, days)).values

    # vaccination acts on days strictly after vaccination_day
    before_days = scenario.vaccination_day + 1
    before = simulate_from(p.susceptible_at_start, p.i0, 0.0, p.beta_p2p, p.beta_cs, p.gamma, before_days)
    # an attempt on a protected machine removes it, so only a keep share stays susceptible
    keep = 1.0 - scenario.block_prob
    s_end = float(before.s[-1])
    after = simulate_from(s_end * keep, float(before.i[-1]), float(before.r[-1]) + s_end * scenario.block_prob,
                          p.beta_p2p, p.beta_cs, scenario.gamma_post_vax, days - before_days)
    return np.concatenate([incidence_of(before).values, incidence_of(after).values])


def _stochastic_counts(scenario: SyntheticScenario) -> np.ndarray:
    """Daily Poisson chain around the one-day deterministic expectation"""
    p = scenario.params
    rng = np.random.default_rng(scenario.noise_seed)
    s, i = p.susceptible_at_start, float(p.i0)
    r = 0.0
    counts = np.zeros(scenario.observation_days, dtype=np.int64)
    for day in range(scenario.observation_days):
        vaccinated = scenario.vaccination_day is not None and day > scenario.vaccination_day
        gamma = scenario.gamma_post_vax if vaccinated else p.gamma
        step = integrate_batch(s, i, r, p.beta_p2p, p.beta_cs, gamma, 1)
        s1, i1 = float(step.s[1, 0]), float(step.i[1, 0])
        expected = s - s1
        if expected > MAX_EXPECTED_DAILY:
            raise ScenarioError(f"expected {expected:.3g} infections on day {day} exceeds the overflow guard")
        attempts = min(int(rng.poisson(max(expected, 0.0))), int(np.floor(s)))
        blocked = int(rng.binomial(attempts, scenario.block_prob)) if vaccinated and attempts else 0
        infected = attempts - blocked
        counts[day] = infected

        population = s + i + r
        # a blocked attempt still removes the machine
        s = s - attempts
        i = max(i1 + (infected - expected), 0.0)
        r = population - s - i
    return counts


def _rounded_counts(expected: np.ndarray) -> np.ndarray:
    """Integer counts whose running total tracks the rounded expected cumulative"""
    cumulative = np.rint(np.cumsum(expected)).astype(np.int64)
    return np.diff(cumulative, prepend=0)


def _events_frame(file_id: str, counts: np.ndarray, start: date,
                  vaccination_date: Optional[date]) -> pd.DataFrame:
    days = np.repeat(np.arange(len(counts)), counts)
    first_seen = pd.to_datetime(start) + pd.to_timedelta(days, unit="D")
    machine_ids = [f"{file_id[:12]}-{n:08d}" for n in range(len(days))]
    if vaccination_date is not None:
        vax_ts = pd.Timestamp(vaccination_date)
        scan_time = first_seen.where(first_seen > vax_ts, vax_ts)
        verdict = np.full(len(days), Verdict.MALWARE.value, dtype=object)
        signature = np.full(len(days), vaccination_date.isoformat(), dtype=object)
    else:
        scan_time = first_seen
        verdict = np.full(len(days), Verdict.CLEAN.value, dtype=object)
        signature = np.full(len(days), "", dtype=object)
    return pd.DataFrame({
        "machine_id": machine_ids,
        "file_id": file_id,
        "first_seen": first_seen.strftime(DATE_FORMAT),
        "scan_time": pd.DatetimeIndex(scan_time).strftime(DATE_FORMAT),
        "verdict": verdict,
        "signature_date": signature,
    }, columns=EVENT_COLUMNS)


def observed_counts(scenario: SyntheticScenario) -> np.ndarray:
    """Daily new infections over the observation window, without building events"""
    if scenario.noisy:
        return _stochastic_counts(scenario)
    expected = expected_incidence(scenario)
    if expected.max(initial=0.0) > MAX_EXPECTED_DAILY:
        raise ScenarioError(f"expected daily infections exceed the overflow guard for {scenario.file_id}")
    return _rounded_counts(expected)


def ground_truth(scenario: SyntheticScenario, counts: Optional[np.ndarray] = None) -> GroundTruth:
    """Ground truth anchored at the first day with an infection"""
    if counts is None:
        counts = observed_counts(scenario)
    p = scenario.params
    file_id = scenario.file_id
    nonzero = np.nonzero(counts)[0]
    offset = int(nonzero[0]) if len(nonzero) else 0
    observed = counts[offset:].astype(float)
    vaccination_day = None
    if scenario.vaccinated_within_window:
        vaccination_day = max(0, scenario.vaccination_day - offset)
    day0 = scenario.start_date + timedelta(days=offset)
    return GroundTruth(
        series=MalwareSeries(file_id, IncidenceSeries(observed, day0), int(counts.sum()), vaccination_day, day0),
        params=p,
        scenario=scenario,
        day_offset=offset,
    )


def generate(scenario: SyntheticScenario) -> Tuple[pd.DataFrame, GroundTruth]:
    """Per-machine events plus the exact ground truth; reproducible from noise_seed"""
    p = scenario.params
    counts = observed_counts(scenario)
    file_id = scenario.file_id
    vaccination_date = None
    if scenario.vaccinated_within_window:
        vaccination_date = scenario.start_date + timedelta(days=scenario.vaccination_day)
    events = _events_frame(file_id, counts, scenario.start_date, vaccination_date)
    truth = ground_truth(scenario, counts)
    logger.debug(f"Generated {int(counts.sum())} infections for {file_id[:12]} ({p.mode.value})")
    return events, truth


def generate_corpus(n: int, seed: int, corpus_config: Dict[str, Any],
                    start_date: date = date(2019, 1, 1), noisy: bool = True) -> List[SyntheticScenario]:
    """Draw n scenarios with off-grid parameters from the corpus configuration"""
    if n < 1:
        raise ParameterDomainError(f"corpus size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    cfg = corpus_config
    scenarios = []
    for _ in range(n):
        mode = InfectionMode.P2P if rng.random() < cfg["p2p_share"] else InfectionMode.CS
        r0 = float(rng.uniform(*cfg["r0_range"]))
        population = float(np.round(10 ** rng.uniform(*cfg["population_log10_range"])))
        if mode is InfectionMode.P2P:
            gamma = float(10 ** rng.uniform(*np.log10(cfg["p2p_gamma_range"])))
            i0 = float(max(1.0, np.round(population * 10 ** rng.uniform(*cfg["p2p_initial_fraction_log10_range"]))))
        else:
            gamma = float(10 ** rng.uniform(*np.log10(cfg["cs_gamma_range"])))
            i0 = float(rng.integers(cfg["cs_initial_infected_range"][0], cfg["cs_initial_infected_range"][1] + 1))
        vaccination_day = None
        if rng.random() < cfg["vaccination_probability"]:
            low, high = cfg["vaccination_day_range"]
            vaccination_day = int(rng.integers(low, high + 1))
        scenarios.append(SyntheticScenario(
            params=EpidemicParams.from_r0(mode, i0, r0, gamma, population),
            vaccination_day=vaccination_day,
            gamma_post_vax=max(float(cfg["gamma_post_vax"]), gamma),
            block_prob=float(cfg["block_prob"]),
            noise_seed=int(rng.integers(0, 2**31 - 1)),
            observation_days=int(cfg["observation_days"]),
            noisy=noisy,
            start_date=start_date,
        ))
    return scenarios


def write_corpus(scenarios: List[SyntheticScenario], directory: Union[str, Path]) -> Tuple[List[Path], List[GroundTruth]]:
    """Generate every scenario and write events.csv plus the ground_truth.csv sidecar"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frames, truths = [], []
    for scenario in scenarios:
        events, truth = generate(scenario)
        frames.append(events)
        truths.append(truth)
    events_path = directory / "events.csv"
    truth_path = directory / "ground_truth.csv"
    all_events = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=EVENT_COLUMNS)
    all_events.to_csv(events_path, index=False)
    pd.DataFrame([t.to_row() for t in truths], columns=GROUND_TRUTH_COLUMNS).to_csv(
        truth_path, index=False, float_format="%.17g")
    logger.info(f"✅ Wrote {len(all_events)} events for {len(scenarios)} scenarios to {directory}")
    return [events_path, truth_path], truths


def load_ground_truth(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InputError(f"ground truth file not found: {path}")
    return _read_table(path, ["file_id", "mode"], dtype={"file_id": str}, float_precision="round_trip")
