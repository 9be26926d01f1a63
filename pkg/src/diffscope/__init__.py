"""diffscope: no-arbitrage diagnostics for one-dimensional diffusion prices.

Given a general diffusion (scale function, speed measure, state interval,
start point) the package decides NUPBR, NFLVR and the existence of an
equivalent martingale measure on finite and infinite horizons, with a
clause-by-clause trace, and cross-checks the verdicts by simulating a
speed-measure random walk.
"""

from .boundary import BoundaryReport, audit_boundary_consistency, boundary_report, feller_accessibility
from .catalog import CATALOG_ORDER, UnknownModel, catalog_lookup, get_model, load_model
from .classifier import ArbitrageReport, Truth, Verdict, classify, verdict_emm, verdict_nflvr, verdict_nupbr
from .config import ParsedConfig, SchemaError, ValidationError, parse_model_config
from .expr import ExpressionParseError, compile_expression
from .model import (
    DiffusionSpec,
    ScaleSpec,
    SpeedSpec,
    StateInterval,
    eval_scale,
    ito_speed,
    measure_mass,
    scale_from_beta,
    scale_from_ito,
    validate,
)
from .quadrature import ImproperConfig, IntegralVerdict, decide_improper, decide_log_improper, integrate_adaptive

__version__ = "0.1.0"

__all__ = [
    "ArbitrageReport",
    "BoundaryReport",
    "CATALOG_ORDER",
    "DiffusionSpec",
    "ExpressionParseError",
    "ImproperConfig",
    "IntegralVerdict",
    "ParsedConfig",
    "ScaleSpec",
    "SchemaError",
    "SpeedSpec",
    "StateInterval",
    "Truth",
    "UnknownModel",
    "ValidationError",
    "Verdict",
    "audit_boundary_consistency",
    "boundary_report",
    "catalog_lookup",
    "classify",
    "compile_expression",
    "decide_improper",
    "decide_log_improper",
    "eval_scale",
    "feller_accessibility",
    "get_model",
    "integrate_adaptive",
    "ito_speed",
    "load_model",
    "measure_mass",
    "parse_model_config",
    "scale_from_beta",
    "scale_from_ito",
    "validate",
    "verdict_emm",
    "verdict_nflvr",
    "verdict_nupbr",
]
