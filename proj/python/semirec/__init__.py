"""Python bindings for the semirec C++ core."""

import json

from ._semirec import (
    Mesh,
    SemirecError,
    bump_trace,
    chain_rule_terms,
    disk_mesh,
    dn_derivative,
    fd_dn_derivative,
    localized_potentials,
    solve_semilinear,
    triangles_in_disk,
    trig_trace,
    window_trace,
)
from . import _semirec


def _config_text(config):
    # JSON is valid YAML, so dicts go through json.dumps
    return config if isinstance(config, str) else json.dumps(config)


def run_scenario(config, jobs=1, out=None):
    """Run a scenario from YAML text or a dict; returns the summary as a dict."""
    return json.loads(_semirec.run_scenario(_config_text(config), jobs, out))


def validate_config(config):
    return _semirec.validate_config(_config_text(config))


def generate_synthetic_data(config):
    return json.loads(_semirec.generate_synthetic_data(_config_text(config)))


__all__ = [
    "Mesh",
    "SemirecError",
    "bump_trace",
    "chain_rule_terms",
    "disk_mesh",
    "dn_derivative",
    "fd_dn_derivative",
    "generate_synthetic_data",
    "localized_potentials",
    "run_scenario",
    "solve_semilinear",
    "triangles_in_disk",
    "trig_trace",
    "validate_config",
    "window_trace",
]
