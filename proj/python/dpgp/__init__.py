"""Differentially private Gaussian process regression."""

import json as _json

from ._dpgp import *  # noqa: F401,F403
from ._dpgp import _run_experiment_json, _hpselect_json


def run_experiment(config):
    """Cross-validated benchmark for a config dict; returns the JSON report as a dict."""
    return _json.loads(_run_experiment_json(_json.dumps(config)))


def hpselect(config, seed=None):
    """DP hyperparameter selection for a config dict with a 'grid' section."""
    return _json.loads(_hpselect_json(_json.dumps(config), -1 if seed is None else seed))
