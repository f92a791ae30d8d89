"""
Configuration Manager for the Malware Spread Analyzer
Centralizes loading of the pipeline and synthetic-corpus configuration files
"""

import copy
import json
import logging
from typing import Dict, Any, Optional
from pathlib import Path

logger = logging.getLogger(__name__)

# Built-in defaults, used when a file or a key is missing
DEFAULT_PIPELINE_CONFIG: Dict[str, Any] = {
    "epidemic": {
        "step_days": 0.05,
        "horizon_days": 730,
        "undershoot_tolerance": 1e-9,
        "early_stop_fraction": 1e-9,
    },
    "dictionary": {
        "grid_points": 10,
        "modes": ["P2P", "CS"],
        "susceptible_at_start": 10_000_000,
        "min_template_total": 1.0,
        "min_template_spread": 1e-3,
    },
    "fitting": {"fit_window_days": 30, "tau_max": 25, "min_overlap": 3},
    "prediction": {"offset_mode": "once", "min_window_days": 5},
    "vaccination": {
        "termination_fraction": 0.99,
        "quiet_days": 14,
        "split_threshold": 0.6,
        "cv_folds": 10,
        "tree_max_depth": 4,
        "tree_min_leaf": 5,
        "importance_repeats": 20,
        "cox_max_iter": 100,
        "cox_tolerance": 1e-8,
        "min_samples": 20,
    },
    "telemetry": {
        "min_machines": 200,
        "max_reject_fraction": 0.10,
        "chunk_rows": 200_000,
        "start_date": "2019-01-01",
    },
    "run": {"seed": 20190101, "jobs": 1},
}

DEFAULT_CORPUS_CONFIG: Dict[str, Any] = {
    "scenarios": 200,
    "p2p_share": 0.2,
    "r0_range": [2.5, 5.0],
    "p2p_gamma_range": [0.008, 0.01],
    "cs_gamma_range": [0.007, 0.01],
    "population_log10_range": [3.0, 5.0],
    "p2p_initial_fraction_log10_range": [-0.4, -0.2],
    "cs_initial_infected_range": [1, 20],
    "vaccination_probability": 0.94,
    "vaccination_day_range": [5, 120],
    "block_prob": 0.75,
    "gamma_post_vax": 0.1,
    "observation_days": 365,
}


def _merge(defaults: Dict[str, Any], loaded: Dict[str, Any]) -> Dict[str, Any]:
    """Overlay loaded values on a deep copy of the defaults"""
    merged = copy.deepcopy(defaults)
    for key, value in loaded.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigurationManager:
    """Manages the configuration files of the analyzer"""

    def __init__(self, config_dir: str = "config"):
        self.config_dir = Path(config_dir)
        self._pipeline_config: Optional[Dict[str, Any]] = None
        self._corpus_config: Optional[Dict[str, Any]] = None

    def _load_json_config(self, filename: str) -> Dict[str, Any]:
        """Load a JSON configuration file"""
        try:
            config_path = self.config_dir / filename
            if not config_path.exists():
                logger.warning(f"Configuration file {filename} not found at {config_path}, using defaults")
                return {}

            with open(config_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except Exception as e:
            logger.error(f"Error loading configuration file {filename}: {str(e)}")
            return {}

    def reload_all_configs(self):
        """Reload all configuration files"""
        self._pipeline_config = None
        self._corpus_config = None
        logger.info("All configurations reloaded")

    # Pipeline configuration
    @property
    def pipeline_config(self) -> Dict[str, Any]:
        """Get the pipeline configuration merged over the built-in defaults"""
        if self._pipeline_config is None:
            loaded = self._load_json_config("pipeline_config.json")
            self._pipeline_config = _merge(DEFAULT_PIPELINE_CONFIG, loaded)
        return self._pipeline_config

    def get_section(self, section: str) -> Dict[str, Any]:
        """Get one section of the pipeline configuration"""
        return self.pipeline_config.get(section, {})

    def flat_pipeline_defaults(self) -> Dict[str, Any]:
        """All pipeline settings as one flat mapping, used to seed RunConfig"""
        flat: Dict[str, Any] = {}
        for section in self.pipeline_config.values():
            if isinstance(section, dict):
                flat.update(section)
        return flat

    # Synthetic corpus configuration
    @property
    def corpus_config(self) -> Dict[str, Any]:
        """Get the synthetic corpus configuration"""
        if self._corpus_config is None:
            loaded = self._load_json_config("corpus_config.json")
            self._corpus_config = _merge(DEFAULT_CORPUS_CONFIG, loaded)
        return self._corpus_config
