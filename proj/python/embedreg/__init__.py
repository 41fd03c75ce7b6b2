"""Embedding-based regression: tasks, embedders, MLP head, NLFD diagnostics."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import run_experiment as _run_experiment


def run(runner, config, out="out", force=False):
    """Run an experiment; `config` may be a dict or a JSON string."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run_experiment(runner, config, out, force)
