"""No-arbitrage verdicts (NUPBR, NFLVR, existence of an equivalent martingale
measure) for a diffusion price process, on finite and infinite horizons.

Every verdict is three-valued and carries an ordered trace of the clauses
that produced it.  Clause ids ("2.3" for the regularity condition,
"2.8(i.a)" and so on) are stable labels that downstream tools can key on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .boundary import (
    ABSORBING,
    ACCESSIBLE,
    INACCESSIBLE,
    LOWER,
    REFLECTING,
    UPPER,
    AuditSkipped,
    BoundaryReport,
    audit_boundary_consistency,
    boundary_report,
)
from .model import DiffusionSpec
from .quadrature import ImproperConfig, IntegrationFailure, check_local_sq_integrability

__all__ = [
    "Truth",
    "TraceEntry",
    "Verdict",
    "ArbitrageReport",
    "FINITE",
    "INFINITE",
    "regularity_condition",
    "verdict_nupbr",
    "verdict_nflvr",
    "verdict_emm",
    "classify",
]

FINITE, INFINITE = "finite", "infinite"
SIDES = (LOWER, UPPER)


class Truth(str, enum.Enum):
    """Kleene three-valued logic."""

    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"

    @classmethod
    def of(cls, flag):
        if flag is None:
            return cls.INCONCLUSIVE
        return cls.HOLDS if flag else cls.FAILS

    def __and__(self, other):
        if self is Truth.FAILS or other is Truth.FAILS:
            return Truth.FAILS
        if self is Truth.HOLDS and other is Truth.HOLDS:
            return Truth.HOLDS
        return Truth.INCONCLUSIVE

    def __or__(self, other):
        if self is Truth.HOLDS or other is Truth.HOLDS:
            return Truth.HOLDS
        if self is Truth.FAILS and other is Truth.FAILS:
            return Truth.FAILS
        return Truth.INCONCLUSIVE

    def __invert__(self):
        return {Truth.HOLDS: Truth.FAILS, Truth.FAILS: Truth.HOLDS}.get(self, Truth.INCONCLUSIVE)


def all_of(values):
    out = Truth.HOLDS
    for v in values:
        out = out & v
    return out


def any_of(values):
    out = Truth.FAILS
    for v in values:
        out = out | v
    return out


@dataclass(frozen=True)
class TraceEntry:
    clause: str
    side: str | None
    value: Truth
    detail: str = ""

    def to_dict(self):
        return {"clause": self.clause, "side": self.side, "value": self.value.value, "detail": self.detail}


@dataclass(frozen=True)
class Verdict:
    value: Truth
    trace: tuple = ()

    def cites(self, clause, side=None, value=None):
        """True if the trace contains a matching entry."""
        return any(
            e.clause == clause and (side is None or e.side == side) and (value is None or e.value is value)
            for e in self.trace
        )

    def to_dict(self):
        return {"value": self.value.value, "trace": [e.to_dict() for e in self.trace]}


def _integral_truth(verdict, want_finite=True):
    if not verdict.is_conclusive:
        return Truth.INCONCLUSIVE
    return Truth.of(verdict.is_finite == want_finite)


def _acc_truth(report: BoundaryReport):
    if report.accessibility == INACCESSIBLE:
        return Truth.HOLDS
    if report.accessibility == ACCESSIBLE:
        return Truth.FAILS
    return Truth.INCONCLUSIVE


# --- regularity -------------------------------------------------------------


def _compacts(spec: DiffusionSpec):
    """Nested compact subintervals of the open state space around ``x0``."""
    out = []
    for depth in (1, 4, 8, 16):
        ends = []
        for b, sign in ((spec.l, -1.0), (spec.r, 1.0)):
            if math.isinf(b):
                ends.append(spec.x0 + sign * max(1.0, abs(spec.x0)) * (2.0**depth - 1.0))
            else:
                ends.append(b + (spec.x0 - b) * 2.0**-depth)
        out.append(tuple(ends))
    return out


def regularity_condition(spec: DiffusionSpec, reports=None, cfg: ImproperConfig | None = None) -> Verdict:
    """``beta`` exists and is locally square integrable, and no finite
    boundary is accessible and reflecting."""
    trace = []
    if not spec.scale.has_beta:
        v = Truth.INCONCLUSIVE
        trace.append(TraceEntry("2.3", None, v, "beta not available for this scale function"))
    else:
        try:
            checks = check_local_sq_integrability(spec.beta, _compacts(spec), spec.scale.singular_points, cfg)
            vals = [_integral_truth(c) for c in checks]
        except (IntegrationFailure, FloatingPointError) as exc:
            vals = [Truth.INCONCLUSIVE]
            trace.append(TraceEntry("2.3", None, Truth.INCONCLUSIVE, f"beta^2 integration failed: {exc}"))
        v = all_of(vals)
        trace.append(TraceEntry("2.3", None, v, "beta^2 locally integrable"))
    if reports is None:
        reports = {side: boundary_report(spec, side, cfg) for side in SIDES}
    for side in SIDES:
        r = reports[side]
        if not r.b_finite:
            continue
        if r.accessibility == INACCESSIBLE:
            t, detail = Truth.HOLDS, "inaccessible"
        elif r.behavior == ABSORBING:
            t, detail = Truth.HOLDS, "accessible and absorbing"
        elif r.behavior == REFLECTING:
            t, detail = Truth.FAILS, "accessible and reflecting"
        else:
            t, detail = Truth.INCONCLUSIVE, "accessibility undecided"
        trace.append(TraceEntry("2.3", side, t, detail))
        v = v & t
    return Verdict(v, tuple(trace))


# --- verdicts -----------------------------------------------------------------


@dataclass
class _Context:
    spec: DiffusionSpec
    reports: dict
    regularity: Verdict
    natural: bool

    @classmethod
    def build(cls, spec, cfg=None):
        reports = {side: boundary_report(spec, side, cfg) for side in SIDES}
        return cls(spec, reports, regularity_condition(spec, reports, cfg), spec.is_natural_scale())

    def other(self, side):
        return self.reports[UPPER if side == LOWER else LOWER]


def _check_horizon(horizon):
    if horizon not in (FINITE, INFINITE):
        raise ValueError(f"horizon must be {FINITE!r} or {INFINITE!r}, got {horizon!r}")


def _beta_clause(r: BoundaryReport):
    """``b`` finite with ``int |x - b| beta^2 dx < inf``."""
    if not r.b_finite:
        return Truth.FAILS
    return _integral_truth(r.beta_integral)


def _beta_detail(r):
    if not r.b_finite:
        return "boundary infinite"
    return f"beta integral {r.beta_integral.outcome}"


def _natural_scale_verdict(ctx, clause):
    """In natural scale on an infinite horizon the criteria reduce to: every
    finite boundary is inaccessible or absorbing."""
    trace = list(ctx.regularity.trace)
    v = Truth.HOLDS
    finite = [s for s in SIDES if ctx.reports[s].b_finite]
    if not finite:
        trace.append(TraceEntry(clause, None, Truth.HOLDS, "natural scale, no finite boundary"))
    for side in finite:
        r = ctx.reports[side]
        if r.accessibility == INACCESSIBLE:
            t = Truth.HOLDS
        elif r.accessibility == ACCESSIBLE:
            t = Truth.of(r.behavior == ABSORBING)
        else:
            t = Truth.INCONCLUSIVE
        trace.append(TraceEntry(clause, side, t, f"natural scale, {r.accessibility} {r.behavior}"))
        v = v & t
    # the regularity condition itself is still required for beta
    v = v & ctx.regularity.value
    return Verdict(v, tuple(trace))


def _nupbr(ctx: _Context, horizon):
    trace = list(ctx.regularity.trace)
    v = ctx.regularity.value
    if horizon == FINITE:
        for side in SIDES:
            r = ctx.reports[side]
            if not r.b_finite:
                continue
            ia = _integral_truth(r.beta_integral)
            ib = _acc_truth(r)
            trace.append(TraceEntry("2.8(i.a)", side, ia, _beta_detail(r)))
            trace.append(TraceEntry("2.8(i.b)", side, ib, r.accessibility))
            v = v & (ia | ib)
        return Verdict(v, tuple(trace))
    if ctx.natural:
        return _natural_scale_verdict(ctx, "2.11")
    for side in SIDES:
        r = ctx.reports[side]
        ia = _beta_clause(r)
        ib = Truth.of(None if r.s_finite is None else not r.s_finite) & _beta_clause(ctx.other(side))
        trace.append(TraceEntry("2.10(i.a)", side, ia, _beta_detail(r)))
        trace.append(
            TraceEntry("2.10(i.b)", side, ib, f"scale at boundary {_s_word(r)}; at the other end {_beta_detail(ctx.other(side))}")
        )
        v = v & (ia | ib)
    return Verdict(v, tuple(trace))


def _s_word(r):
    return {None: "undecided", True: "finite", False: "infinite"}[r.s_finite]


def _nflvr(ctx: _Context, horizon):
    trace = list(ctx.regularity.trace)
    v = ctx.regularity.value
    if horizon == FINITE:
        for side in SIDES:
            r = ctx.reports[side]
            if not r.b_finite:
                continue
            iia = _integral_truth(r.beta_integral)
            iib = _acc_truth(r) & _integral_truth(r.scale_speed_integral, want_finite=False)
            trace.append(TraceEntry("2.8(ii.a)", side, iia, _beta_detail(r)))
            trace.append(
                TraceEntry("2.8(ii.b)", side, iib, f"{r.accessibility}; scale-speed integral {r.scale_speed_integral.outcome}")
            )
            v = v & (iia | iib)
        return Verdict(v, tuple(trace))
    if ctx.natural:
        return _natural_scale_verdict(ctx, "2.11")
    for side in SIDES:
        r = ctx.reports[side]
        iia = _beta_clause(r)
        iib = (
            Truth.of(not r.b_finite)
            & Truth.of(None if r.s_finite is None else not r.s_finite)
            & _beta_clause(ctx.other(side))
        )
        trace.append(TraceEntry("2.10(ii.a)", side, iia, _beta_detail(r)))
        trace.append(
            TraceEntry(
                "2.10(ii.b)",
                side,
                iib,
                f"boundary {'finite' if r.b_finite else 'infinite'}; scale at boundary {_s_word(r)}; "
                f"at the other end {_beta_detail(ctx.other(side))}",
            )
        )
        v = v & (iia | iib)
    return Verdict(v, tuple(trace))


def _emm(ctx: _Context, horizon):
    if horizon == FINITE:
        base = _nflvr(ctx, FINITE)
        trace = list(base.trace)
        v = base.value
        for side in SIDES:
            r = ctx.reports[side]
            if r.b_finite:
                continue
            t = _integral_truth(r.kotani, want_finite=False)
            trace.append(TraceEntry("2.12", side, t, f"Kotani integral {r.kotani.outcome}"))
            v = v & t
        return Verdict(v, tuple(trace))
    trace = list(ctx.regularity.trace)
    v = ctx.regularity.value
    for side in SIDES:
        r = ctx.reports[side]
        t = _beta_clause(r)
        trace.append(TraceEntry("2.13", side, t, _beta_detail(r)))
        v = v & t
    return Verdict(v, tuple(trace))


def verdict_nupbr(spec: DiffusionSpec, horizon=FINITE, cfg: ImproperConfig | None = None) -> Verdict:
    _check_horizon(horizon)
    return _nupbr(_Context.build(spec, cfg), horizon)


def verdict_nflvr(spec: DiffusionSpec, horizon=FINITE, cfg: ImproperConfig | None = None) -> Verdict:
    _check_horizon(horizon)
    return _nflvr(_Context.build(spec, cfg), horizon)


def verdict_emm(spec: DiffusionSpec, horizon=FINITE, cfg: ImproperConfig | None = None) -> Verdict:
    _check_horizon(horizon)
    return _emm(_Context.build(spec, cfg), horizon)


# --- full report --------------------------------------------------------------

VERDICT_KEYS = ("nupbr_finite", "nflvr_finite", "nupbr_infinite", "nflvr_infinite", "emm_finite", "emm_infinite")

# (premise, conclusion): premise holding forces conclusion to hold
IMPLICATIONS = (
    ("nflvr_finite", "nupbr_finite"),
    ("nflvr_infinite", "nupbr_infinite"),
    ("emm_finite", "nflvr_finite"),
    ("nupbr_infinite", "nupbr_finite"),
    ("nflvr_infinite", "nflvr_finite"),
    ("emm_infinite", "emm_finite"),
)


@dataclass
class ArbitrageReport:
    regularity: Verdict
    verdicts: dict
    boundaries: dict
    natural_scale: bool
    audit: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __getattr__(self, name):
        verdicts = self.__dict__.get("verdicts", {})
        if name in verdicts:
            return verdicts[name]
        raise AttributeError(name)

    @property
    def conclusive(self):
        return all(v.value is not Truth.INCONCLUSIVE for v in self.verdicts.values())

    def table_row(self):
        return {k: self.verdicts[k].value.value for k in VERDICT_KEYS}

    def to_dict(self):
        return {
            "natural_scale": self.natural_scale,
            "regularity": self.regularity.to_dict(),
            "verdicts": {k: self.verdicts[k].to_dict() for k in VERDICT_KEYS},
            "boundary_reports": {s: self.boundaries[s].to_dict() for s in SIDES},
            "lemma_audit": self.audit,
            "warnings": list(self.warnings),
        }


def _enforce_implications(verdicts, warnings):
    for premise, conclusion in IMPLICATIONS:
        p, c = verdicts[premise], verdicts[conclusion]
        if p.value is Truth.HOLDS and c.value is Truth.FAILS:
            msg = f"{premise} holds but {conclusion} fails"
            warnings.append(f"InternalInconsistency: {msg}")
            for key in (premise, conclusion):
                v = verdicts[key]
                entry = TraceEntry("InternalInconsistency", None, Truth.INCONCLUSIVE, msg)
                verdicts[key] = Verdict(Truth.INCONCLUSIVE, v.trace + (entry,))


def classify(spec: DiffusionSpec, cfg: ImproperConfig | None = None) -> ArbitrageReport:
    """All six verdicts plus boundary reports and the boundary consistency
    audit.  Verdicts that contradict each other are downgraded to
    inconclusive rather than reported."""
    ctx = _Context.build(spec, cfg)
    verdicts = {
        "nupbr_finite": _nupbr(ctx, FINITE),
        "nflvr_finite": _nflvr(ctx, FINITE),
        "nupbr_infinite": _nupbr(ctx, INFINITE),
        "nflvr_infinite": _nflvr(ctx, INFINITE),
        "emm_finite": _emm(ctx, FINITE),
        "emm_infinite": _emm(ctx, INFINITE),
    }
    warnings = []
    _enforce_implications(verdicts, warnings)
    audit = {}
    for side in SIDES:
        r = ctx.reports[side]
        if not r.b_finite:
            audit[side] = "not applicable"
            continue
        try:
            found = audit_boundary_consistency(r)
        except AuditSkipped:
            audit[side] = "skipped"
            continue
        audit[side] = found
        warnings.extend(f"{side}: {f}" for f in found)
    return ArbitrageReport(ctx.regularity, verdicts, ctx.reports, ctx.natural, audit, warnings)

