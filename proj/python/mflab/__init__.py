"""Mean-field bounds laboratory: Python front end to the C++ core."""

import json as _json

from . import _core
from ._core import ConfigError, set_workers, suite_names, saw_totals, lt_g_poly, ising_two_point, perc_torus_two_point

__all__ = [
    "ConfigError",
    "set_workers",
    "suite_names",
    "kernel_info",
    "green",
    "green_identity",
    "saw_totals",
    "saw_checks",
    "perc_torus_two_point",
    "perc_mc",
    "ising_two_point",
    "lt_g_poly",
    "regularity",
    "parse_config",
    "observe",
    "verify",
]


def _cfg(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def kernel_info(family, d, R=1):
    return _json.loads(_core.kernel_info(family, d, R))


def green(family, d, R, beta, tail_eps=1e-10):
    return _json.loads(_core.green(family, d, R, beta, tail_eps))


def green_identity(family, d, R, beta_low, beta_high):
    return _json.loads(_core.green_identity(family, d, R, beta_low, beta_high))


def saw_checks(d, lam, N, beta_low, beta_high):
    """I.1 on (beta_low, beta_high) and I.2 at beta_high; betas are strings like "1/4"."""
    return _json.loads(_core.saw_checks(d, str(lam), N, str(beta_low), str(beta_high)))


def perc_mc(d, L, beta, trials, seed=1):
    return _json.loads(_core.perc_mc(d, L, beta, trials, seed))


def regularity(family, d, R=1):
    return _json.loads(_core.regularity(family, d, R))


def parse_config(config):
    """Validated config with defaults filled in; raises ConfigError (a ValueError)."""
    return _json.loads(_core.parse_config(_cfg(config)))


def observe(model, config=None, points=16, beta_end=-1.0):
    """Observables on a beta grid as long-format CSV text."""
    return _core.observe(model, _cfg(config), points, beta_end)


def verify(suite, config=None):
    return _json.loads(_core.verify(suite, _cfg(config)))
