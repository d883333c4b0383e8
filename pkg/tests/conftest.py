import pytest

from nrdiff_core.config import reset_settings_cache


@pytest.fixture(autouse=True)
def nrdiff_test_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NRDIFF_RUNS_DIR", str(tmp_path / "runs"))
    monkeypatch.delenv("NRDIFF_LOG_LEVEL", raising=False)
    monkeypatch.delenv("NRDIFF_THREADS", raising=False)
    monkeypatch.delenv("NRDIFF_PERSIST_RUN_RECORDS", raising=False)
    reset_settings_cache()
    yield
    reset_settings_cache()
