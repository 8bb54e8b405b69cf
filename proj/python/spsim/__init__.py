"""Simulation and analysis of a blinking triggered single-photon source.

Times passed to correlation routines are integer picoseconds; simulation
durations are seconds.
"""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import ConfigError, DomainError, FormatError, IoError, Weighting
from ._core import run_report as _run_report

__all__ = [name for name in dir() if not name.startswith("_")]


def run_report(config_text, out_dir, seed=None, overrides=None):
    """Run a configured pipeline and return the report as a dict."""
    return _json.loads(_run_report(config_text, str(out_dir), seed, dict(overrides or {})))
