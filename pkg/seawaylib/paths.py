# seawaylib/paths.py
import os
from pathlib import Path
from typing import Optional

DATA_DIR = Path(__file__).resolve().parent / "data"

OUTPUT_README = """# Simulation Output Directory

This directory contains closed-loop runs written by the seaway tool.

- `<variant>.csv`: per-step trajectory log (schema tag on the first line)
- `comparison.csv`: variants aligned column-wise on a common time grid
- `summary.toml`: scalar comparison metrics per variant
- `plot_runs.py`: optional plotting script (`seaway plot-script`)
"""


def shipped_scenario_path(name: str = "narrow_channel") -> Path:
    """Path of a scenario file bundled with the package."""
    return DATA_DIR / f"{name}.toml"


def shipped_vessel_path(name: str = "cybership2") -> Path:
    """Path of a vessel parameter file bundled with the package."""
    return DATA_DIR / f"{name}.toml"


def get_output_dir(out: str) -> str:
    """Get the output directory for a run, creating it (with a README) if needed."""
    out_path = Path(out).expanduser().resolve()
    if not out_path.exists():
        out_path.mkdir(parents=True, exist_ok=True)
        with open(out_path / "README.md", "w") as f:
            f.write(OUTPUT_README)
    return str(out_path)


def resolve_reference(ref: str, base_file: Optional[str]) -> Path:
    """Resolve a file reference found inside another file.

    Relative references are tried next to `base_file` first, then in the
    shipped data directory (so `vessel = "cybership2.toml"` works anywhere).
    """
    p = Path(os.path.expanduser(ref))
    if p.is_absolute():
        return p
    if base_file is not None:
        candidate = Path(base_file).resolve().parent / p
        if candidate.exists():
            return candidate
    candidate = DATA_DIR / p
    if candidate.exists():
        return candidate
    return p
