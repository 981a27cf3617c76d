from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture(autouse=True)
def _quiet_env(monkeypatch):
    # A developer's .env must not change CLI defaults under test.
    for name in ("ZERO_ACTUAL_POLICY", "OUTPUT_FORMAT", "VERBOSE", "RANK_TIE_REL_TOL",
                 "VERIFY_TRIALS", "FISHER_TRIALS", "PERTURBATION_SCALE"):
        monkeypatch.delenv(name, raising=False)
