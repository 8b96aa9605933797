"""Pytest configuration and fixtures."""

import os
from pathlib import Path

import numpy as np
import pytest

from src.config import ToolkitConfig
from src.mixers import sample_keys

# Seeds used across statistical tests; results are deterministic for these
TEST_SEED = 20240611
MILLION = 1_000_000


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Drop POWERCH_* variables so every test starts from built-in defaults."""
    for name in list(os.environ):
        if name.startswith("POWERCH_"):
            monkeypatch.delenv(name)
    yield
    # load_dotenv writes straight to os.environ, bypassing monkeypatch
    for name in list(os.environ):
        if name.startswith("POWERCH_"):
            del os.environ[name]


@pytest.fixture
def keys() -> np.ndarray:
    """A small batch of pre-mixed keys."""
    return sample_keys(TEST_SEED, 0, 2_000)


@pytest.fixture
def raw_keys() -> np.ndarray:
    """Sequential keys 0..1999 without pre-mixing (low bits highly structured)."""
    return sample_keys(0, 0, 2_000, premixed=False)


@pytest.fixture
def million_keys() -> np.ndarray:
    """10^6 pre-mixed keys for distribution checks."""
    return sample_keys(TEST_SEED, 0, MILLION)


@pytest.fixture
def test_config(tmp_path: Path) -> ToolkitConfig:
    """Create a test configuration with small, fast settings."""
    return ToolkitConfig(
        seed=TEST_SEED,
        workers=2,
        chunk_size=50_000,
        bench_keys=1_000,
        bench_reps=2,
        bench_warmup=100,
        bench_buckets=[16, 256],
        out_dir=tmp_path / "results",
    )


@pytest.fixture
def bitmap_file(tmp_path: Path) -> Path:
    """Availability bitmap for 20 buckets with buckets 3 and 7 down."""
    flags = ["1"] * 20
    flags[3] = "0"
    flags[7] = "0"
    path = tmp_path / "availability.txt"
    path.write_text("".join(flags[:10]) + "\n" + "".join(flags[10:]) + "\n")
    return path
