import os
import sys
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

import pytest

# Ensure runs are recorded in a throwaway SQLite ledger during tests
os.environ.setdefault("DATABASE_URL", "sqlite:///./test_malspread_runs.db")

from services.dictionary_service import build_dictionary, build_grid  # noqa: E402

TEST_HORIZON_DAYS = 365


@pytest.fixture(scope="session")
def dictionary():
    """Full 10x10x10 grid with a one-year horizon, shared across the session"""
    return build_dictionary(build_grid(10), horizon_days=TEST_HORIZON_DAYS)


@pytest.fixture(scope="session")
def small_dictionary():
    """Coarse grid for end-to-end CLI runs"""
    return build_dictionary(build_grid(4), horizon_days=200)
