"""Environment settings for nrdiff-comm-core."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv


def _to_bool(value: Optional[str], default: bool) -> bool:
    if value is None:
        return default
    lowered = value.strip().lower()
    if lowered in {"1", "true", "yes", "y", "on"}:
        return True
    if lowered in {"0", "false", "no", "n", "off"}:
        return False
    return default


def _to_int(value: Optional[str], default: int) -> int:
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        return default


@dataclass(frozen=True)
class Settings:
    """Process-level settings read from the environment (not part of a run config)."""

    runs_dir: Path = field(default_factory=lambda: Path("runs"))
    log_level: str = "WARNING"
    threads: int = 1
    persist_run_records: bool = True

    def resolve_runs_dir(self, cwd: Optional[Path] = None) -> Path:
        base = cwd or Path.cwd()
        path = self.runs_dir
        return (path if path.is_absolute() else base / path).expanduser().resolve()


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load settings from environment, caching the result."""

    load_dotenv()

    runs_dir = Path(os.getenv("NRDIFF_RUNS_DIR", "runs")).expanduser()
    log_level = os.getenv("NRDIFF_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"
    threads = max(_to_int(os.getenv("NRDIFF_THREADS"), 1), 1)
    persist = _to_bool(os.getenv("NRDIFF_PERSIST_RUN_RECORDS"), True)

    return Settings(
        runs_dir=runs_dir,
        log_level=log_level,
        threads=threads,
        persist_run_records=persist,
    )


def reset_settings_cache() -> None:
    """Clear cached settings (useful for tests)."""

    get_settings.cache_clear()
