"""Per-boundary analysis: Feller accessibility, boundary behavior, the two
weighted tail integrals entering the no-arbitrage criteria, and Kotani's
integral at infinite endpoints.

Tail integrals near a boundary ``b`` are all decided from an anchor ``c``
strictly inside the state space: the midpoint between ``x0`` and ``b`` for a
finite ``b``, ``x0`` itself for an infinite one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import DiffusionSpec
from .quadrature import (
    ImproperConfig,
    IntegralVerdict,
    IntegrationFailure,
    cumulative_integral,
    decide_log_improper,
    decide_measure_integral,
)

__all__ = [
    "LOWER",
    "UPPER",
    "ACCESSIBLE",
    "INACCESSIBLE",
    "INCONCLUSIVE",
    "ABSORBING",
    "REFLECTING",
    "NOT_APPLICABLE",
    "AuditSkipped",
    "BoundaryReport",
    "boundary_point",
    "boundary_anchor",
    "scale_at_boundary",
    "feller_integral",
    "feller_accessibility",
    "boundary_behavior",
    "beta_tail_integral",
    "scale_speed_tail_integral",
    "kotani_integral",
    "boundary_report",
    "audit_boundary_consistency",
]

LOWER, UPPER = "lower", "upper"
ACCESSIBLE, INACCESSIBLE, INCONCLUSIVE = "accessible", "inaccessible", "inconclusive"
ABSORBING, REFLECTING, NOT_APPLICABLE = "absorbing", "reflecting", "not_applicable"


class AuditSkipped(RuntimeError):
    """The consistency audit needs conclusive verdicts everywhere."""


def _check_side(side):
    if side not in (LOWER, UPPER):
        raise ValueError(f"side must be {LOWER!r} or {UPPER!r}, got {side!r}")


def boundary_point(spec: DiffusionSpec, side):
    _check_side(side)
    return spec.l if side == LOWER else spec.r


def boundary_anchor(spec: DiffusionSpec, side):
    b = boundary_point(spec, side)
    return spec.x0 if math.isinf(b) else 0.5 * (spec.x0 + b)


def _guard(fn, *args):
    try:
        return fn(*args)
    except (IntegrationFailure, FloatingPointError) as exc:
        return IntegralVerdict.inconclusive(f"{type(exc).__name__}: {exc}")


def scale_at_boundary(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None):
    """Decide ``|s(b)| < inf`` and return ``(verdict, s(b))``.

    ``s(b)`` is ``s(c)`` plus/minus the tail integral of ``s'``, or an infinity
    if the tail diverges, or ``nan`` when undecided.
    """
    b = boundary_point(spec, side)
    c = boundary_anchor(spec, side)
    v = _guard(decide_log_improper, spec.log_sprime, b, c, cfg)
    sign = -1.0 if side == LOWER else 1.0
    if v.is_finite:
        s_c = float(spec.s(np.array([c]))[0])
        return v, s_c + sign * v.value
    if v.is_infinite:
        return v, sign * math.inf
    return v, math.nan


def _mass_between(spec, c, y):
    """Speed mass strictly between each ``y`` and ``c`` (boundary masses
    excluded)."""
    dens = np.abs(cumulative_integral(spec.speed.density_at, c, y, spec.interval.bounds))
    for z, g in spec.speed.atoms:
        if g > 0:
            dens = dens + g * ((np.minimum(y, c) < z) & (z < np.maximum(y, c)))
    return dens


def feller_integral(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None):
    """``int_B |s(b) - s(x)| m(dx)`` over ``B = (b, c)``.

    Evaluated after exchanging the order of integration as
    ``int_B s'(y) m(between y and c) dy``, which has the same value and
    avoids differencing ``s`` near ``b``.
    """
    b = boundary_point(spec, side)
    c = boundary_anchor(spec, side)

    def log_integrand(y):
        with np.errstate(divide="ignore"):
            return spec.log_sprime(y) + np.log(_mass_between(spec, c, y))

    return _guard(decide_log_improper, log_integrand, b, c, cfg)


def feller_accessibility(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None):
    """Feller's test.  Returns ``(accessibility, trace)`` where ``trace`` maps
    ``"scale"`` and (if reached) ``"feller"`` to their verdicts."""
    s_verdict, s_b = scale_at_boundary(spec, side, cfg)
    trace = {"scale": s_verdict, "s_at_b": s_b}
    if s_verdict.is_infinite:
        return INACCESSIBLE, trace
    if not s_verdict.is_conclusive:
        return INCONCLUSIVE, trace
    fi = feller_integral(spec, side, cfg)
    trace["feller"] = fi
    if fi.is_finite:
        return ACCESSIBLE, trace
    if fi.is_infinite:
        return INACCESSIBLE, trace
    return INCONCLUSIVE, trace


def boundary_behavior(spec: DiffusionSpec, side, accessibility):
    """Absorbing iff the endpoint carries infinite speed mass."""
    if accessibility != ACCESSIBLE:
        return NOT_APPLICABLE
    mass = spec.speed.boundary_mass_l if side == LOWER else spec.speed.boundary_mass_r
    return ABSORBING if math.isinf(mass) else REFLECTING


def beta_tail_integral(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None):
    """``int_B |x - b| beta(x)**2 dx`` near a finite boundary."""
    b = boundary_point(spec, side)
    if math.isinf(b):
        return IntegralVerdict.inconclusive("boundary infinite")
    if not spec.scale.has_beta:
        return IntegralVerdict.inconclusive("no beta")
    c = boundary_anchor(spec, side)

    def log_integrand(x):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(x - b)) + 2.0 * np.log(np.abs(spec.beta(x)))

    return _guard(decide_log_improper, log_integrand, b, c, cfg)


def _sprime_weighted(spec, weight, b, c, cfg):
    def g(x):
        return weight(x) * np.exp(spec.log_sprime(x))

    def log_g_density(x):
        with np.errstate(divide="ignore"):
            return np.log(weight(x)) + spec.log_sprime_density(x)

    return _guard(decide_measure_integral, g, spec.speed, b, c, cfg, log_g_density)


def scale_speed_tail_integral(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None):
    """``int_B |x - b| s'(x) m(dx)`` near a finite boundary."""
    b = boundary_point(spec, side)
    if math.isinf(b):
        return IntegralVerdict.inconclusive("boundary infinite")
    c = boundary_anchor(spec, side)
    return _sprime_weighted(spec, lambda x: np.abs(np.asarray(x) - b), b, c, cfg)


def kotani_integral(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None):
    """``int_B |x| s'(x) m(dx)`` near an infinite boundary."""
    b = boundary_point(spec, side)
    if not math.isinf(b):
        return IntegralVerdict.inconclusive("boundary finite")
    c = boundary_anchor(spec, side)
    return _sprime_weighted(spec, lambda x: np.abs(np.asarray(x)), b, c, cfg)


@dataclass(frozen=True)
class BoundaryReport:
    side: str
    b: float
    b_finite: bool
    s_at_b: float
    s_finite: bool | None
    accessibility: str
    behavior: str
    beta_integral: IntegralVerdict
    scale_speed_integral: IntegralVerdict
    kotani: IntegralVerdict
    anchor: float
    scale_verdict: IntegralVerdict = field(repr=False, default=None)
    feller_verdict: IntegralVerdict | None = field(repr=False, default=None)

    def to_dict(self):
        def num(v):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return None
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v

        out = {
            "side": self.side,
            "b": num(self.b),
            "b_finite": self.b_finite,
            "s_at_b": num(self.s_at_b),
            "s_finite": self.s_finite,
            "accessibility": self.accessibility,
            "behavior": self.behavior,
            "anchor": self.anchor,
            "scale_integral": self.scale_verdict.to_dict() if self.scale_verdict else None,
            "feller_integral": self.feller_verdict.to_dict() if self.feller_verdict else None,
            "beta_integral": self.beta_integral.to_dict(),
            "scale_speed_integral": self.scale_speed_integral.to_dict(),
            "kotani_integral": self.kotani.to_dict(),
        }
        return out


def boundary_report(spec: DiffusionSpec, side, cfg: ImproperConfig | None = None) -> BoundaryReport:
    b = boundary_point(spec, side)
    acc, trace = feller_accessibility(spec, side, cfg)
    s_verdict = trace["scale"]
    s_finite = None if not s_verdict.is_conclusive else s_verdict.is_finite
    return BoundaryReport(
        side=side,
        b=b,
        b_finite=not math.isinf(b),
        s_at_b=trace["s_at_b"],
        s_finite=s_finite,
        accessibility=acc,
        behavior=boundary_behavior(spec, side, acc),
        beta_integral=beta_tail_integral(spec, side, cfg),
        scale_speed_integral=scale_speed_tail_integral(spec, side, cfg),
        kotani=kotani_integral(spec, side, cfg),
        anchor=boundary_anchor(spec, side),
        scale_verdict=s_verdict,
        feller_verdict=trace.get("feller"),
    )


def audit_boundary_consistency(report: BoundaryReport):
    """Cross-check the verdicts of a finite boundary against the implications
    that must hold between scale finiteness, accessibility and the two tail
    integrals.  Returns a list of violated implication labels; an empty list
    means consistent.  Infinite boundaries are not constrained.
    """
    if not report.b_finite:
        return []
    if (
        report.s_finite is None
        or report.accessibility == INCONCLUSIVE
        or not report.beta_integral.is_conclusive
        or not report.scale_speed_integral.is_conclusive
    ):
        raise AuditSkipped(f"{report.side} boundary has inconclusive verdicts")
    beta_fin = report.beta_integral.is_finite
    sp_inf = report.scale_speed_integral.is_infinite
    acc = report.accessibility == ACCESSIBLE
    out = []
    if not report.s_finite and beta_fin:
        out.append("violates 2.4(i)")
    if ((acc and sp_inf) or (not acc and not sp_inf)) and beta_fin:
        out.append("violates 2.4(ii)")
    if beta_fin and not ((not acc and sp_inf) or (acc and not sp_inf)):
        out.append("violates 2.4(iii)")
    return out
