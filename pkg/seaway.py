#!/usr/bin/env -S uv run --script
# /// script
# requires-python = ">=3.10"
# dependencies = [
#   "numpy>=1.24",
#   "tomli>=2.0.0; python_version < '3.11'",
#   "tomli-w>=1.0.0",
# ]
# ///

# Thin shim: delegates to seawaylib and re-exports the public API

# Re-exports used by tests (import seaway; seaway.func())
from seawaylib import api
from seawaylib.api import *  # noqa: F401,F403
from seawaylib.cli import main  # CLI entrypoint

__all__ = ["main", *api.__all__]

if __name__ == "__main__":
    main()
