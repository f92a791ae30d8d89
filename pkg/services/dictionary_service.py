"""
Dictionary Service
Builds, saves and loads the library of model incidence templates
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Tuple, Union

import numpy as np
import pandas as pd

from app_settings import settings
from epidemic.simulator import (
    DEFAULT_HORIZON_DAYS,
    DEFAULT_STEP_DAYS,
    EARLY_STOP_FRACTION,
    UNDERSHOOT_TOLERANCE,
    incidence_matrix,
    integrate_batch,
    template_total,
)
from epidemic.state import EpidemicParams, IncidenceSeries, InfectionMode
from errors import ConfigurationError, InputError, ParameterDomainError

logger = logging.getLogger(__name__)

# Canonical susceptible count at t=0 for every dictionary entry
DICTIONARY_SUSCEPTIBLE = 10_000_000.0

# Templates whose daily values vary by less than this share of their mean carry no shape
MIN_TEMPLATE_SPREAD = 1e-3

I0_RANGE = (1.0, 1e7)
R0_RANGE = (0.7, 5.0)
GAMMA_RANGE = (1e-6, 1e-2)

# Entry ids are laid out mode-major in this order
MODE_ORDER: Tuple[InfectionMode, ...] = (InfectionMode.P2P, InfectionMode.CS)

MANIFEST_FILE = "manifest.json"
ENTRIES_FILE = "entries.csv"
TEMPLATES_FILE = "templates.csv"


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int
    i0_range: Tuple[float, float] = I0_RANGE
    r0_range: Tuple[float, float] = R0_RANGE
    gamma_range: Tuple[float, float] = GAMMA_RANGE

    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """i0 and gamma log-spaced, r0 linear, all endpoints inclusive"""
        n = self.points_per_axis
        i0s = np.logspace(np.log10(self.i0_range[0]), np.log10(self.i0_range[1]), n)
        r0s = np.linspace(self.r0_range[0], self.r0_range[1], n)
        gammas = np.logspace(np.log10(self.gamma_range[0]), np.log10(self.gamma_range[1]), n)
        return i0s, r0s, gammas

    def to_dict(self) -> Dict[str, object]:
        return {
            "points_per_axis": self.points_per_axis,
            "i0_range": list(self.i0_range),
            "r0_range": list(self.r0_range),
            "gamma_range": list(self.gamma_range),
            "i0_spacing": "log",
            "r0_spacing": "linear",
            "gamma_spacing": "log",
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "GridSpec":
        return cls(
            points_per_axis=int(data["points_per_axis"]),
            i0_range=tuple(data["i0_range"]),
            r0_range=tuple(data["r0_range"]),
            gamma_range=tuple(data["gamma_range"]),
        )


@dataclass(frozen=True)
class ParameterGrid:
    """(i0, r0, gamma) triples ordered i0, then r0, then gamma ascending"""

    spec: GridSpec
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Tuple[float, float, float]]:
        for i0, r0, gamma in self.points:
            yield float(i0), float(r0), float(gamma)

    def __getitem__(self, index: int) -> Tuple[float, float, float]:
        i0, r0, gamma = self.points[index]
        return float(i0), float(r0), float(gamma)


def build_grid(points_per_axis: int = 10) -> ParameterGrid:
    """Table-style parameter grid: points_per_axis^3 triples"""
    if points_per_axis < 2:
        raise ParameterDomainError(f"points_per_axis must be >= 2, got {points_per_axis}")
    spec = GridSpec(points_per_axis)
    i0s, r0s, gammas = spec.axes()
    points = np.array(list(product(i0s, r0s, gammas)), dtype=float)
    return ParameterGrid(spec, points)


@dataclass(frozen=True)
class DictionaryEntry:
    entry_id: int
    params: EpidemicParams
    template: IncidenceSeries

    @property
    def mode(self) -> InfectionMode:
        return self.params.mode


@dataclass(frozen=True)
class Dictionary:
    entries: Tuple[DictionaryEntry, ...]
    grid_spec: GridSpec
    horizon_days: int
    susceptible_at_start: float = DICTIONARY_SUSCEPTIBLE
    step_days: float = DEFAULT_STEP_DAYS
    skipped: int = 0
    _by_id: Dict[int, DictionaryEntry] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self._by_id.update({entry.entry_id: entry for entry in self.entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[DictionaryEntry]:
        return iter(self.entries)

    def get(self, entry_id: int) -> DictionaryEntry:
        return self._by_id[entry_id]

    @cached_property
    def templates(self) -> np.ndarray:
        """(n_entries, horizon_days) matrix of templates in entry order"""
        matrix = np.vstack([entry.template.values for entry in self.entries])
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def entry_ids(self) -> np.ndarray:
        return np.array([entry.entry_id for entry in self.entries], dtype=int)

    @cached_property
    def modes(self) -> np.ndarray:
        return np.array([entry.mode.value for entry in self.entries])

    def indices_for(self, mode: InfectionMode) -> np.ndarray:
        return np.nonzero(self.modes == mode.value)[0]

    def template_total(self, entry_id: int, fraction: float = EARLY_STOP_FRACTION) -> float:
        """Full-horizon cumulative incidence of a template, truncated at the early-stop day"""
        entry = self.get(entry_id)
        return template_total(entry.template.values, entry.params.population, fraction)


def _entry_id(mode: InfectionMode, grid_index: int, grid_size: int) -> int:
    return MODE_ORDER.index(mode) * grid_size + grid_index


def _integrate_chunk(args):
    params_chunk, horizon_days, step_days, undershoot_tolerance = args
    s0 = np.array([p.susceptible_at_start for p in params_chunk])
    i0 = np.array([p.i0 for p in params_chunk])
    bp = np.array([p.beta_p2p for p in params_chunk])
    bc = np.array([p.beta_cs for p in params_chunk])
    g = np.array([p.gamma for p in params_chunk])
    batch = integrate_batch(s0, i0, np.zeros_like(s0), bp, bc, g, horizon_days, step_days,
                            undershoot_tolerance)
    return incidence_matrix(batch.s), batch.failed


def build_dictionary(grid: ParameterGrid, modes: Iterable[InfectionMode] = MODE_ORDER,
                     horizon_days: int = DEFAULT_HORIZON_DAYS,
                     step_days: float = DEFAULT_STEP_DAYS,
                     susceptible_at_start: float = DICTIONARY_SUSCEPTIBLE,
                     min_template_total: float = 1.0,
                     min_template_spread: float = MIN_TEMPLATE_SPREAD,
                     undershoot_tolerance: float = UNDERSHOOT_TOLERANCE,
                     jobs: int = 1) -> Dictionary:
    """One entry per (grid point, mode) whose simulation is valid, spreads to >= 1 machine and has a shape.

    A template is shapeless when its standard deviation over the horizon is below
    min_template_spread times its mean; such near-constant curves match any gentle trend.
    """
    modes = set(modes)
    if len(grid) == 0:
        raise ParameterDomainError("grid is empty")
    if not modes or not modes <= set(MODE_ORDER):
        raise ParameterDomainError(f"modes must be a non-empty subset of P2P/CS, got {sorted(m.value for m in modes)}")

    entries: List[DictionaryEntry] = []
    skipped = 0
    for mode in MODE_ORDER:
        if mode not in modes:
            continue
        params = [
            EpidemicParams.from_r0(mode, i0, r0, gamma, susceptible_at_start + i0)
            for i0, r0, gamma in grid
        ]
        chunks = np.array_split(np.arange(len(params)), max(1, min(jobs, len(params))))
        work = [([params[k] for k in chunk], horizon_days, step_days, undershoot_tolerance)
                for chunk in chunks if len(chunk)]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_integrate_chunk, work))
        else:
            results = [_integrate_chunk(item) for item in work]

        templates = np.vstack([r[0] for r in results])
        failed = np.concatenate([r[1] for r in results])
        for grid_index, (p, values, bad) in enumerate(zip(params, templates, failed)):
            if bad or values.sum() < min_template_total or values.std() < min_template_spread * values.mean():
                skipped += 1
                logger.debug(f"Skipping degenerate {mode.value} grid point i0={p.i0:.4g} r0={p.r0:.4g} gamma={p.gamma:.4g}")
                continue
            entries.append(DictionaryEntry(
                entry_id=_entry_id(mode, grid_index, len(grid)),
                params=p,
                template=IncidenceSeries(values),
            ))

    if not entries:
        raise ConfigurationError("dictionary is empty: every grid point was degenerate")
    logger.info(f"✅ Built dictionary: {len(entries)} entries, {skipped} degenerate grid points skipped")
    return Dictionary(
        entries=tuple(entries),
        grid_spec=grid.spec,
        horizon_days=horizon_days,
        susceptible_at_start=susceptible_at_start,
        step_days=step_days,
        skipped=skipped,
    )


def regenerate_template(entry: DictionaryEntry, horizon_days: int,
                        step_days: float = DEFAULT_STEP_DAYS) -> np.ndarray:
    """Re-simulate one entry's template from its parameters"""
    values, _ = _integrate_chunk(([entry.params], horizon_days, step_days, UNDERSHOOT_TOLERANCE))
    return values[0]


def save_dictionary(dictionary: Dictionary, directory: Union[str, Path]) -> List[Path]:
    """Write manifest.json, entries.csv and templates.csv; returns the written paths"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    manifest = {
        "format_version": settings.DICTIONARY_FORMAT_VERSION,
        "grid_spec": dictionary.grid_spec.to_dict(),
        "horizon_days": dictionary.horizon_days,
        "step_days": dictionary.step_days,
        "susceptible_at_start": dictionary.susceptible_at_start,
        "modes": sorted({entry.mode.value for entry in dictionary.entries},
                        key=lambda m: [x.value for x in MODE_ORDER].index(m)),
        "entries": len(dictionary),
        "skipped": dictionary.skipped,
        "entries_file": ENTRIES_FILE,
        "templates_file": TEMPLATES_FILE,
    }
    manifest_path = directory / MANIFEST_FILE
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    entries = pd.DataFrame({
        "entry_id": dictionary.entry_ids,
        "mode": dictionary.modes,
        "i0": [entry.params.i0 for entry in dictionary.entries],
        "r0": [entry.params.r0 for entry in dictionary.entries],
        "gamma": [entry.params.gamma for entry in dictionary.entries],
    })
    entries_path = directory / ENTRIES_FILE
    entries.to_csv(entries_path, index=False, float_format="%.17g")

    templates = pd.DataFrame(
        dictionary.templates,
        columns=[f"d{t}" for t in range(dictionary.horizon_days)],
    )
    templates.insert(0, "entry_id", dictionary.entry_ids)
    templates_path = directory / TEMPLATES_FILE
    templates.to_csv(templates_path, index=False, float_format="%.17g")

    logger.info(f"💾 Saved dictionary ({len(dictionary)} entries) to {directory}")
    return [manifest_path, entries_path, templates_path]


def load_dictionary(directory: Union[str, Path]) -> Dictionary:
    """Load a dictionary written by save_dictionary"""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.exists():
        raise InputError(f"dictionary manifest not found: {manifest_path}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        entries = pd.read_csv(directory / manifest["entries_file"], float_precision="round_trip")
        templates = pd.read_csv(directory / manifest["templates_file"], float_precision="round_trip")
    except (OSError, ValueError, KeyError) as e:
        raise InputError(f"cannot read dictionary at {directory}: {e}") from e

    if manifest.get("format_version") != settings.DICTIONARY_FORMAT_VERSION:
        raise InputError(f"unsupported dictionary format version {manifest.get('format_version')}")
    if not entries["entry_id"].equals(templates["entry_id"]):
        raise InputError(f"entries and templates are not aligned in {directory}")

    susceptible = float(manifest["susceptible_at_start"])
    values = templates.drop(columns=["entry_id"]).to_numpy(dtype=float)
    loaded = []
    for row, template in zip(entries.itertuples(index=False), values):
        params = EpidemicParams.from_r0(InfectionMode(row.mode), float(row.i0), float(row.r0),
                                        float(row.gamma), susceptible + float(row.i0))
        loaded.append(DictionaryEntry(int(row.entry_id), params, IncidenceSeries(template)))

    logger.info(f"📂 Loaded dictionary ({len(loaded)} entries) from {directory}")
    return Dictionary(
        entries=tuple(loaded),
        grid_spec=GridSpec.from_dict(manifest["grid_spec"]),
        horizon_days=int(manifest["horizon_days"]),
        susceptible_at_start=susceptible,
        step_days=float(manifest["step_days"]),
        skipped=int(manifest["skipped"]),
    )
