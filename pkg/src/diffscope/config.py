"""JSON model configuration: schema validation, expression compilation and
conversion to a :class:`~diffscope.model.DiffusionSpec` plus run settings.

Infinite endpoints and absorbing boundary masses are written as the strings
``"inf"`` / ``"-inf"``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .expr import ExpressionParseError, compile_expression
from .model import (
    DiffusionSpec,
    RawForm,
    ScaleSpec,
    SpeedSpec,
    StateInterval,
    ito_speed,
    probe_points,
    scale_from_beta,
    scale_from_ito,
    validate,
)
from .quadrature import ImproperConfig

__all__ = [
    "ConfigError",
    "SchemaError",
    "ValidationError",
    "ExpressionParseError",
    "SimulationSettings",
    "ParsedConfig",
    "load_schema",
    "parse_model_config",
    "canonical_json",
    "config_hash",
]


class ConfigError(ValueError):
    pass


class SchemaError(ConfigError):
    def __init__(self, errors):
        self.errors = list(errors)  # (pointer, message)
        super().__init__("; ".join(f"{p or '/'}: {m}" for p, m in self.errors))

    @property
    def pointer(self):
        return self.errors[0][0] if self.errors else ""


class ValidationError(ConfigError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p or '/'}: {m}" for p, m in self.errors))


@dataclass(frozen=True)
class SimulationSettings:
    h: float | None = None
    truncation: tuple | None = None
    core: tuple | None = None
    stretch: float | None = None
    n_paths: int | None = None
    seed: int | None = None
    T: float | None = None
    exponential_holding: bool = False

    def merged(self, **overrides):
        """Copy with the non-``None`` overrides applied."""
        kw = {k: v for k, v in overrides.items() if v is not None}
        return SimulationSettings(**{**self.__dict__, **kw})


@dataclass
class ParsedConfig:
    spec: DiffusionSpec
    horizon: str
    quadrature: ImproperConfig
    simulation: SimulationSettings
    document: dict = field(repr=False)

    @property
    def name(self):
        return self.document.get("name")

    @property
    def expectations(self):
        return self.document.get("expectations", {})


_SCHEMA = None


def load_schema():
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files("diffscope").joinpath("schema/model_config.schema.json").read_text()
        _SCHEMA = json.loads(text)
    return _SCHEMA


def _pointer(path):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _schema_errors(document):
    validator = jsonschema.Draft202012Validator(load_schema())
    out = []
    for err in sorted(validator.iter_errors(document), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        path = list(err.absolute_path)
        if err.validator == "required":
            # point at the missing member itself
            missing = [m for m in err.validator_value if isinstance(err.instance, dict) and m not in err.instance]
            for m in missing:
                out.append((_pointer(path + [m]), f"required property {m!r} is missing"))
            continue
        out.append((_pointer(path), err.message))
    return out


def _ext(v):
    if isinstance(v, str):
        return math.inf if v == "inf" else -math.inf
    return float(v)


def canonical_json(document):
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def config_hash(document):
    return hashlib.sha256(canonical_json(document).encode("ascii")).hexdigest()


def _compile(text, pointer):
    try:
        return compile_expression(text)
    except ExpressionParseError as exc:
        exc.pointer = pointer
        raise


def _check_finite(expr, pointer, xs, errors):
    vals = np.asarray(expr(xs), dtype=float) * np.ones_like(xs)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        errors.append((pointer, f"{expr.text!r} is not finite at x={xs[bad][0]!r}"))


def parse_model_config(document, check=True) -> ParsedConfig:
    """Validate ``document`` and build the spec and run settings.

    Raises :class:`SchemaError` (with JSON-pointer locations),
    :class:`ExpressionParseError` (with the pointer of the offending field
    and the character position) or :class:`ValidationError` for semantic
    problems such as a non-positive diffusion coefficient.
    """
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    errs = _schema_errors(document)
    if errs:
        raise SchemaError(errs)
    doc = copy.deepcopy(document)

    si = doc["state_interval"]
    try:
        interval = StateInterval(_ext(si["l"]), _ext(si["r"]), bool(si.get("l_closed", False)), bool(si.get("r_closed", False)))
    except ValueError as exc:
        raise ValidationError([("/state_interval", str(exc))]) from None
    x0 = float(doc["x0"])

    sc = doc["scale"]
    form = sc["form"]
    anchor = float(sc.get("anchor", x0))
    singular = tuple(float(p) for p in sc.get("singular_points", ()))
    exprs = {}
    for key in ("mu_expr", "a_expr", "beta_expr", "s_expr", "s_prime_expr"):
        if key in sc:
            exprs[key] = _compile(sc[key], f"/scale/{key}")
    sp = doc["speed"]
    if "density_expr" in sp:
        exprs["density_expr"] = _compile(sp["density_expr"], "/speed/density_expr")

    errors = []
    if not interval.contains_interior(x0):
        errors.append(("/x0", f"x0={x0} is not in the open state interval"))
    if not interval.contains_interior(anchor):
        errors.append(("/scale/anchor", f"anchor={anchor} is not in the open state interval"))
    if errors:
        raise ValidationError(errors)

    if check:
        xs = probe_points(interval, x0, n=64, depth=8)
        if singular:
            keep = np.all(np.abs(xs[:, None] - np.asarray(singular)[None, :]) > 1e-9, axis=1)
            xs = xs[keep]
        for key, e in exprs.items():
            where = "speed" if key == "density_expr" else "scale"
            _check_finite(e, f"/{where}/{key}", xs, errors)
        if errors:
            raise ValidationError(errors)

    if form == "ito":
        a0 = float(np.asarray(exprs["a_expr"](anchor)))
        if not a0 > 0:
            raise ValidationError([("/scale/a_expr", f"diffusion coefficient a({anchor}) = {a0} is not positive")])
        scale = scale_from_ito(exprs["mu_expr"], exprs["a_expr"], anchor, singular, interval)
    elif form == "beta":
        scale = scale_from_beta(exprs["beta_expr"], anchor, singular, interval)
    else:
        raw = RawForm(exprs["s_expr"], exprs.get("s_prime_expr"), exprs.get("beta_expr"), bool(sc.get("natural", False)))
        scale = ScaleSpec(raw, singular)

    atoms = tuple((float(a["z"]), float(a["gamma"])) for a in sp.get("atoms", ()))
    m_l, m_r = _ext(sp.get("boundary_mass_l", 0.0)), _ext(sp.get("boundary_mass_r", 0.0))
    if sp.get("form", "density") == "ito":
        if form != "ito":
            raise ValidationError([("/speed/form", "an Ito-linked speed measure needs an Ito-form scale")])
        speed = ito_speed(scale, exprs["a_expr"], atoms, m_l, m_r)
    else:
        speed = SpeedSpec(exprs["density_expr"], atoms, m_l, m_r)

    spec = DiffusionSpec(interval, scale, speed, x0)
    if check:
        violations = validate(spec)
        if violations:
            raise ValidationError([(_violation_pointer(v.kind), str(v)) for v in violations])

    q = doc.get("quadrature", {})
    try:
        quad = ImproperConfig(**q)
    except ValueError as exc:
        raise ValidationError([("/quadrature", str(exc))]) from None
    s = doc.get("simulation", {})
    sim = SimulationSettings(
        h=s.get("h"),
        truncation=tuple(s["truncation"]) if "truncation" in s else None,
        core=tuple(s["core"]) if "core" in s else None,
        stretch=s.get("stretch"),
        n_paths=s.get("n_paths"),
        seed=s.get("seed"),
        T=s.get("T"),
        exponential_holding=bool(s.get("exponential_holding", False)),
    )
    return ParsedConfig(spec, doc.get("horizon", "both"), quad, sim, doc)


_VIOLATION_POINTERS = {
    "StartNotInterior": "/x0",
    "AtomNotInterior": "/speed/atoms",
    "NegativeAtom": "/speed/atoms",
    "AtomsNotDistinct": "/speed/atoms",
    "NegativeBoundaryMass": "/speed",
    "NonPositiveDiffusion": "/scale/a_expr",
    "ScaleNotEvaluable": "/scale",
    "ScaleDerivativeNotPositive": "/scale",
    "ScaleNotIncreasing": "/scale/s_expr",
    "NegativeDensity": "/speed/density_expr",
    "SpeedNotEvaluable": "/speed",
    "SpeedNotPositive": "/speed",
}


def _violation_pointer(kind):
    return _VIOLATION_POINTERS.get(kind, "")
