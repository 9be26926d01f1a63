"""Built-in diffusion models, addressable by name with optional parameters,
e.g. ``"gbm(mu=0.05,sigma=0.2)"`` or ``"sticky_bm(gamma=2)"``.

Every entry expands to a plain model configuration document (see
:mod:`diffscope.config`), so a catalog model can be dumped, edited and fed
back through ``--config``.
"""

from __future__ import annotations

import difflib
import inspect
import math
import re

from .config import parse_model_config
from .model import DiffusionSpec

__all__ = [
    "UnknownModel",
    "CATALOG",
    "CATALOG_ORDER",
    "ALIASES",
    "catalog_lookup",
    "load_model",
    "get_model",
    "parse_model_name",
]


class UnknownModel(KeyError):
    def __init__(self, name, suggestion=None):
        self.name = name
        self.suggestion = suggestion
        msg = f"unknown model {name!r}"
        if suggestion:
            msg += f"; did you mean {suggestion!r}?"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


def _num(v):
    """Float literal for an expression string."""
    return repr(float(v))


NATURAL_SCALE = {"form": "raw", "s_expr": "x", "s_prime_expr": "1", "beta_expr": "0", "natural": True}
LEBESGUE = {"density_expr": "1"}
SIM_DEFAULTS = {"h": 0.01, "T": 1.0, "n_paths": 100000, "seed": 7}
ERF1 = math.erf(1.0 / math.sqrt(2.0))  # P(|N(0,1)| < 1)


def _doc(name, description, interval, scale, speed, x0, simulation=None, expectations=None):
    doc = {
        "name": name,
        "description": description,
        "state_interval": interval,
        "scale": dict(scale),
        "speed": dict(speed),
        "x0": float(x0),
        "horizon": "both",
        "simulation": {**SIM_DEFAULTS, **(simulation or {})},
    }
    if expectations:
        doc["expectations"] = expectations
    return doc


def bm(x0=0.0):
    """Standard Brownian motion on the real line."""
    return _doc(
        "bm", "standard Brownian motion",
        {"l": "-inf", "r": "inf"}, NATURAL_SCALE, LEBESGUE, x0,
        {"truncation": [x0 - 8.0, x0 + 8.0]},
        {"mean_exit_time(-1,1)": 1.0, "mean_Z_T": 1.0, "martingale_gap": 0.0},
    )


def absorbed_bm(x0=1.0):
    """Brownian motion on ``[0, inf)`` absorbed at 0."""
    return _doc(
        "absorbed_bm", "Brownian motion absorbed at 0",
        {"l": 0.0, "r": "inf", "l_closed": True}, NATURAL_SCALE, {**LEBESGUE, "boundary_mass_l": "inf"}, x0,
        {"truncation": [0.0, x0 + 8.0]},
    )


def reflecting_bm(x0=1.0, mass=5.0):
    """Brownian motion on ``[0, inf)`` with a sticky-reflecting barrier at 0
    (finite boundary mass ``mass``)."""
    return _doc(
        "reflecting_bm", "Brownian motion with a reflecting barrier at 0",
        {"l": 0.0, "r": "inf", "l_closed": True}, NATURAL_SCALE, {**LEBESGUE, "boundary_mass_l": float(mass)}, x0,
        {"truncation": [0.0, x0 + 8.0]},
    )


def sticky_bm(gamma=1.0, x0=0.0):
    """Brownian motion slowed down at 0 by a speed atom of size ``gamma``."""
    return _doc(
        "sticky_bm", "Brownian motion with a sticky point at 0",
        {"l": "-inf", "r": "inf"}, NATURAL_SCALE, {**LEBESGUE, "atoms": [{"z": 0.0, "gamma": float(gamma)}]}, x0,
        {"truncation": [x0 - 8.0, x0 + 8.0]},
        {"mean_exit_time(-1,1)": 1.0 + float(gamma) if x0 == 0.0 else None},
    )


def gbm(mu=0.05, sigma=0.2, x0=1.0):
    """Geometric Brownian motion ``dX = mu X dt + sigma X dW``."""
    return _doc(
        "gbm", "geometric Brownian motion",
        {"l": 0.0, "r": "inf"},
        {"form": "ito", "mu_expr": f"{_num(mu)}*x", "a_expr": f"({_num(sigma)}*x)^2", "singular_points": [0.0]},
        {"form": "ito"}, x0,
        {"truncation": [x0 * 0.05, x0 * 20.0], "core": [x0 * 0.3, x0 * 3.0]},
        {"mean_Z_T": 1.0},
    )


def ou(kappa=1.0, x0=0.0):
    """Ornstein-Uhlenbeck process ``dX = -kappa X dt + dW``."""
    return _doc(
        "ou", "Ornstein-Uhlenbeck process",
        {"l": "-inf", "r": "inf"},
        {"form": "ito", "mu_expr": f"-{_num(kappa)}*x", "a_expr": "1"},
        {"form": "ito"}, x0,
        {"truncation": [x0 - 4.0, x0 + 4.0], "core": [x0 - 2.5, x0 + 2.5]},
        {"mean_Z_T": 1.0},
    )


def bessel3(x0=1.0):
    """Three-dimensional Bessel process ``dX = dt / X + dW`` on ``(0, inf)``."""
    return _doc(
        "bessel3", "three-dimensional Bessel process",
        {"l": 0.0, "r": "inf"},
        {"form": "ito", "mu_expr": "1/x", "a_expr": "1", "singular_points": [0.0]},
        {"form": "ito"}, x0,
        {"truncation": [1e-4, x0 + 8.0], "core": [x0 * 0.05, x0 + 5.0]},
        {"mean_Z_T": ERF1 if x0 == 1.0 else None},
    )


def inverse_bessel3(x0=1.0):
    """Reciprocal of a three-dimensional Bessel process, ``dX = -X^2 dW``:
    a strict local martingale in natural scale."""
    return _doc(
        "inverse_bessel3", "reciprocal of a three-dimensional Bessel process",
        {"l": 0.0, "r": "inf"}, NATURAL_SCALE, {"density_expr": "x^-4"}, x0,
        {"truncation": [0.02 * x0, 2000.0 * x0], "core": [0.1 * x0, 20.0 * x0]},
        {"martingale_gap": ERF1 - 1.0 if x0 == 1.0 else None},
    )


def bounded_bm_01(x0=0.5):
    """Brownian motion on ``[0, 1]`` absorbed at both ends."""
    return _doc(
        "bounded_bm_01", "Brownian motion on [0, 1] absorbed at both ends",
        {"l": 0.0, "r": 1.0, "l_closed": True, "r_closed": True}, NATURAL_SCALE,
        {**LEBESGUE, "boundary_mass_l": "inf", "boundary_mass_r": "inf"}, x0,
        {"truncation": [0.0, 1.0]},
        {"mean_exit_time(0,1)": x0 * (1.0 - x0)},
    )


def power_family(c=0.0, q=0.0, gamma=0.0, z=2.0, x0=1.0):
    """``dX = c X^(q-1) dt + X^(q/2) dW`` on ``[0, inf)``, absorbed at 0 and
    optionally sticky at ``z`` with speed atom ``gamma``."""
    speed = {"form": "ito", "boundary_mass_l": "inf"}
    if gamma > 0:
        speed["atoms"] = [{"z": float(z), "gamma": float(gamma)}]
    return _doc(
        "power_family", "power-law drift and volatility, absorbed at 0",
        {"l": 0.0, "r": "inf", "l_closed": True},
        {"form": "ito", "mu_expr": f"{_num(c)}*x^{_num(q - 1.0)}", "a_expr": f"x^{_num(q)}", "singular_points": [0.0]},
        speed, x0,
        {"truncation": [0.0, x0 + 8.0]},
    )


CATALOG = {
    "bm": bm,
    "absorbed_bm": absorbed_bm,
    "reflecting_bm": reflecting_bm,
    "sticky_bm": sticky_bm,
    "gbm": gbm,
    "ou": ou,
    "bessel3": bessel3,
    "inverse_bessel3": inverse_bessel3,
    "bounded_bm_01": bounded_bm_01,
    "power_family": power_family,
}

# alternative names accepted on the command line
ALIASES = {"example_2_14": "power_family"}

# the models listed by ``diffscope catalog``
CATALOG_ORDER = (
    "bm",
    "absorbed_bm",
    "reflecting_bm",
    "sticky_bm",
    "gbm(mu=0.05,sigma=0.2)",
    "ou(kappa=1)",
    "bessel3",
    "inverse_bessel3",
    "bounded_bm_01",
)

_NAME_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_model_name(text):
    """Split ``"name(k=v,...)"`` into ``(name, {k: float(v)})``."""
    m = _NAME_RE.match(text)
    if not m:
        raise UnknownModel(text)
    name, args = m.group(1), m.group(2)
    params = {}
    if args and args.strip():
        for part in args.split(","):
            if "=" not in part:
                raise ValueError(f"model parameter {part.strip()!r} must be key=value")
            k, v = part.split("=", 1)
            params[k.strip()] = float(v)
    return name, params


def catalog_lookup(text) -> dict:
    """Expanded configuration document for a catalog model name."""
    name, params = parse_model_name(text)
    name = ALIASES.get(name, name)
    if name not in CATALOG:
        close = difflib.get_close_matches(name, list(CATALOG) + list(ALIASES), n=1)
        raise UnknownModel(name, close[0] if close else None)
    fn = CATALOG[name]
    allowed = set(inspect.signature(fn).parameters)
    bad = sorted(set(params) - allowed)
    if bad:
        raise ValueError(f"model {name!r} has no parameter(s) {', '.join(bad)}; allowed: {', '.join(sorted(allowed))}")
    doc = fn(**params)
    if params:
        doc["name"] = f"{name}({','.join(f'{k}={v:g}' for k, v in params.items())})"
    exp = doc.get("expectations")
    if exp is not None:
        doc["expectations"] = {k: v for k, v in exp.items() if v is not None}
    return doc


def load_model(text):
    """Parsed configuration (spec plus run settings) for a catalog name."""
    return parse_model_config(catalog_lookup(text))


def get_model(text) -> DiffusionSpec:
    return load_model(text).spec
