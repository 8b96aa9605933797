"""Configuration management for the power-ch toolkit."""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from .mixers import MASK64


def _default_bench_buckets() -> List[int]:
    return [1 << e for e in range(4, 25, 4)]


def parse_int_list(text: str) -> List[int]:
    """Parse "16,256,4096" (base prefixes like 0x allowed) into a list of ints."""
    values = [int(part, 0) for part in text.replace(" ", "").split(",") if part]
    if not values:
        raise ValueError(f"expected a comma-separated list of integers, got {text!r}")
    return values


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass
class ToolkitConfig:
    """Defaults shared by the verification, benchmark and rehash commands."""

    # Sampling
    seed: int = 0
    alpha: float = 0.001
    premix: bool = True
    workers: int = 1
    chunk_size: int = 1_000_000  # keys per sampling chunk

    # Rehashing
    max_probes: int = 8

    # Benchmark
    bench_keys: int = 100_000
    bench_reps: int = 5
    bench_warmup: int = 10_000
    bench_buckets: List[int] = field(default_factory=_default_bench_buckets)

    # Output
    out_dir: Optional[Path] = None

    # Runtime
    verbose: bool = False

    def __post_init__(self):
        """Normalise types coming from the environment or callers."""
        self.seed = int(self.seed) & MASK64
        self.bench_buckets = [int(n) for n in self.bench_buckets]
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)

    def validate(self) -> "ToolkitConfig":
        """Raise ValueError for out-of-range settings; returns self for chaining."""
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.max_probes < 1:
            raise ValueError(f"max_probes must be >= 1, got {self.max_probes}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.bench_reps < 1:
            raise ValueError(f"bench_reps must be >= 1, got {self.bench_reps}")
        if self.bench_keys < 1 or self.bench_warmup < 0:
            raise ValueError("bench_keys must be >= 1 and bench_warmup >= 0")
        if not self.bench_buckets:
            raise ValueError("bench_buckets must not be empty")
        return self

    def output_path(self, name: str) -> Optional[Path]:
        """Default location for a named report when out_dir is set."""
        if self.out_dir is None:
            return None
        return self.out_dir / name

    @classmethod
    def from_env(cls, env_file: Optional[Path] = None) -> "ToolkitConfig":
        """Load configuration from environment variables."""
        if env_file:
            load_dotenv(env_file)
        else:
            load_dotenv()

        config = cls()

        # Sampling
        if val := os.getenv("POWERCH_SEED"):
            config.seed = int(val, 0) & MASK64
        if val := os.getenv("POWERCH_ALPHA"):
            config.alpha = float(val)
        if val := os.getenv("POWERCH_PREMIX"):
            config.premix = _parse_bool(val)
        if val := os.getenv("POWERCH_WORKERS"):
            config.workers = int(val)
        if val := os.getenv("POWERCH_CHUNK_SIZE"):
            config.chunk_size = int(val)

        # Rehashing
        if val := os.getenv("POWERCH_MAX_PROBES"):
            config.max_probes = int(val)

        # Benchmark
        if val := os.getenv("POWERCH_BENCH_KEYS"):
            config.bench_keys = int(val)
        if val := os.getenv("POWERCH_BENCH_REPS"):
            config.bench_reps = int(val)
        if val := os.getenv("POWERCH_BENCH_WARMUP"):
            config.bench_warmup = int(val)
        if val := os.getenv("POWERCH_BENCH_BUCKETS"):
            config.bench_buckets = parse_int_list(val)

        # Output
        if val := os.getenv("POWERCH_OUT_DIR"):
            config.out_dir = Path(val)

        return config
