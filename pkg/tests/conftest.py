import sys
from pathlib import Path

import numpy as np
import pytest

APP_DIR = Path(__file__).resolve().parent.parent / "app"
if str(APP_DIR) not in sys.path:
    sys.path.insert(0, str(APP_DIR))

import env  # noqa: E402
from db.session import reset_engine  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    """Results, database and matrix cache inside the test's temporary directory"""
    monkeypatch.setattr(env, "OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setattr(env, "DATABASE_URL", f"sqlite:///{tmp_path / 'results' / 'results.db'}")
    monkeypatch.setattr(env, "MATRIX_CACHE_DIR", "")
    monkeypatch.setattr(env, "WORKERS", 1)
    reset_engine()
    yield
    reset_engine()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
