from pathlib import Path

import seaway
from seawaylib.paths import get_output_dir


def test_get_output_dir_creates_readme(tmp_path):
    out = get_output_dir(str(tmp_path / "runs" / "today"))
    out_path = Path(out)
    assert out_path.is_dir()
    assert (out_path / "README.md").exists()
    assert "comparison.csv" in (out_path / "README.md").read_text()


def test_get_output_dir_keeps_existing(tmp_path):
    existing = tmp_path / "runs"
    existing.mkdir()
    get_output_dir(str(existing))
    assert not (existing / "README.md").exists()


def test_shipped_files_exist():
    assert seaway.shipped_scenario_path().exists()
    assert seaway.shipped_vessel_path().exists()


def test_log_level_resolution(tmp_path, monkeypatch):
    from seawaylib.config import TRACE, resolve_log_level

    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    monkeypatch.delenv("ASV_LOG_LEVEL", raising=False)
    assert resolve_log_level() == 20
    monkeypatch.setenv("ASV_LOG_LEVEL", "trace")
    assert resolve_log_level() == TRACE
    assert resolve_log_level("error") == 40
    assert resolve_log_level("loud") == 20
