"""Diffusion specifications: state interval, scale function, speed measure.

Coefficient functions are black-box numpy-vectorized callables.  The scale
function is normalized to ``s(anchor) = 0`` and ``s'(anchor) = 1`` (times an
optional increasing affine map carried in ``factor``/``offset``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .quadrature import (
    IntegrationFailure,
    cumulative_integral,
    decide_log_improper,
    geometric_points,
    integrate_intervals,
    log_integrate_intervals,
)

__all__ = [
    "DiffusionError",
    "NonPositiveDiffusion",
    "OutOfDomain",
    "SingularPoint",
    "StateInterval",
    "ItoForm",
    "BetaForm",
    "RawForm",
    "ScaleSpec",
    "SpeedSpec",
    "DiffusionSpec",
    "Violation",
    "ScaleValue",
    "scale_from_ito",
    "scale_from_beta",
    "ito_speed",
    "eval_scale",
    "measure_mass",
    "validate",
    "probe_points",
]

PROBE_POINTS = 512
PROBE_DEPTH = 20


class DiffusionError(ValueError):
    pass


class NonPositiveDiffusion(DiffusionError):
    pass


class OutOfDomain(DiffusionError):
    pass


class SingularPoint(DiffusionError):
    pass


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class StateInterval:
    l: float
    r: float
    l_closed: bool = False
    r_closed: bool = False

    def __post_init__(self):
        if not self.l < self.r:
            raise DiffusionError(f"empty state interval: l={self.l} >= r={self.r}")
        if (self.l_closed and math.isinf(self.l)) or (self.r_closed and math.isinf(self.r)):
            raise DiffusionError("an infinite endpoint cannot be closed")

    def contains_interior(self, x):
        return self.l < x < self.r

    @property
    def bounds(self):
        return (self.l, self.r)


@dataclass(frozen=True)
class ItoForm:
    mu: Callable
    a: Callable
    anchor: float


@dataclass(frozen=True)
class BetaForm:
    beta: Callable
    anchor: float


@dataclass(frozen=True)
class RawForm:
    """Scale given directly.  ``beta`` declares regularity (``None`` means
    irregular/undeclared); ``s_prime`` defaults to a central difference."""

    s: Callable
    s_prime: Callable | None = None
    beta: Callable | None = None
    natural: bool = False


@dataclass(frozen=True)
class ScaleSpec:
    form: ItoForm | BetaForm | RawForm
    singular_points: tuple = ()
    factor: float = 1.0
    offset: float = 0.0
    # endpoints of the state space, used only to place quadrature knots
    boundaries: tuple = (-math.inf, math.inf)

    @property
    def has_beta(self):
        return not isinstance(self.form, RawForm) or self.form.beta is not None

    @property
    def anchor(self):
        return getattr(self.form, "anchor", None)

    def beta(self, x):
        x = _arr(x)
        f = self.form
        if isinstance(f, ItoForm):
            return -2.0 * _arr(f.mu(x)) / _arr(f.a(x))
        if isinstance(f, BetaForm):
            return _arr(f.beta(x)) * np.ones_like(x)
        if f.beta is None:
            return None
        return _arr(f.beta(x)) * np.ones_like(x)

    def base_log_sprime(self, x):
        """``log s'`` before the affine factor is applied."""
        x = _arr(x)
        f = self.form
        if isinstance(f, RawForm):
            if f.s_prime is not None:
                d = _arr(f.s_prime(x)) * np.ones_like(x)
            else:
                h = 1e-6 * np.maximum(1.0, np.abs(x))
                d = (_arr(f.s(x + h)) - _arr(f.s(x - h))) / (2 * h)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(d)
        if self.is_natural_form():
            return np.zeros_like(x)
        return cumulative_integral(self.beta, f.anchor, x, self.boundaries)

    def is_natural_form(self):
        f = self.form
        if isinstance(f, RawForm):
            return f.natural
        return False

    def log_sprime(self, x):
        return math.log(self.factor) + self.base_log_sprime(x)

    def sprime(self, x):
        return np.exp(self.log_sprime(x))

    def s(self, x):
        x = _arr(x)
        f = self.form
        if isinstance(f, RawForm):
            return self.factor * _arr(f.s(x)) + self.offset
        base = cumulative_integral(lambda y: np.exp(self.base_log_sprime(y)), f.anchor, x, self.boundaries)
        return self.factor * base + self.offset

    def with_affine(self, alpha, c):
        """Scale ``alpha * s + c`` (``alpha > 0``)."""
        if not alpha > 0:
            raise DiffusionError("affine factor must be positive")
        return replace(self, factor=self.factor * alpha, offset=self.offset * alpha + c)


def scale_from_ito(mu, a, anchor, singular_points=(), interval: StateInterval | None = None):
    """Scale of ``dY = mu dt + sqrt(a) dW``: ``s'(x) = exp(-int_anchor^x 2 mu/a)``.

    Raises :class:`NonPositiveDiffusion` if ``a`` is not positive at the anchor.
    """
    if not float(_arr(a(np.array([anchor])))[0]) > 0:
        raise NonPositiveDiffusion(f"a(anchor) <= 0 at {anchor}")
    bounds = interval.bounds if interval is not None else (-math.inf, math.inf)
    return ScaleSpec(ItoForm(mu, a, float(anchor)), tuple(singular_points), boundaries=bounds)


def scale_from_beta(beta, anchor, singular_points=(), interval: StateInterval | None = None):
    bounds = interval.bounds if interval is not None else (-math.inf, math.inf)
    return ScaleSpec(BetaForm(beta, float(anchor)), tuple(singular_points), boundaries=bounds)


@dataclass(frozen=True)
class SpeedSpec:
    """Speed measure: Lebesgue density, interior atoms and boundary masses.

    ``density`` may be omitted when ``linked_scale``/``ito_a`` are given; the
    density is then ``1 / (s'(x) a(x))`` for the linked scale, which is how an
    Ito diffusion's speed measure is written.  ``math.inf`` boundary mass
    marks an absorbing endpoint.
    """

    density: Callable | None = None
    atoms: tuple = ()
    boundary_mass_l: float = 0.0
    boundary_mass_r: float = 0.0
    ito_a: Callable | None = None
    linked_scale: ScaleSpec | None = field(default=None, repr=False)
    log_density_fn: Callable | None = field(default=None, repr=False)

    @property
    def is_linked(self):
        return self.linked_scale is not None

    def log_density(self, x):
        x = _arr(x)
        if self.log_density_fn is not None:
            return _arr(self.log_density_fn(x)) * np.ones_like(x)
        if self.is_linked:
            return -self.linked_scale.base_log_sprime(x) - np.log(_arr(self.ito_a(x)))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(_arr(self.density(x)) * np.ones_like(x))

    def density_at(self, x):
        return np.exp(self.log_density(x))

    def with_atom(self, z, gamma):
        return replace(self, atoms=tuple(self.atoms) + ((float(z), float(gamma)),))


def ito_speed(scale: ScaleSpec, a, atoms=(), boundary_mass_l=0.0, boundary_mass_r=0.0):
    return SpeedSpec(None, tuple(atoms), boundary_mass_l, boundary_mass_r, ito_a=a, linked_scale=scale)


@dataclass(frozen=True)
class DiffusionSpec:
    interval: StateInterval
    scale: ScaleSpec
    speed: SpeedSpec
    x0: float

    def __post_init__(self):
        if self.scale.boundaries != self.interval.bounds:
            object.__setattr__(self, "scale", replace(self.scale, boundaries=self.interval.bounds))

    @property
    def l(self):
        return self.interval.l

    @property
    def r(self):
        return self.interval.r

    def beta(self, x):
        return self.scale.beta(x)

    def log_sprime(self, x):
        return self.scale.log_sprime(x)

    def log_speed_density(self, x):
        return self.speed.log_density(x)

    def log_sprime_density(self, x):
        """``log(s'(x) * rho(x))``, exact for Ito-linked speed measures."""
        x = _arr(x)
        sp = self.speed
        if sp.is_linked and sp.linked_scale.form is self.scale.form:
            return math.log(self.scale.factor / sp.linked_scale.factor) - np.log(_arr(sp.ito_a(x)) * np.ones_like(x))
        return self.log_sprime(x) + self.log_speed_density(x)

    def s(self, x):
        return self.scale.s(x)

    def with_affine_scale(self, alpha, c):
        return replace(self, scale=self.scale.with_affine(alpha, c))

    def with_atom(self, z, gamma):
        return replace(self, speed=self.speed.with_atom(z, gamma))

    def is_natural_scale(self, tol=0.0):
        """``beta`` vanishes at every probe point.  Exact by default: the
        boundary integrals see any nonzero ``beta``, however small, and the
        two must agree."""
        if isinstance(self.scale.form, RawForm):
            return self.scale.form.natural
        b = self.beta(probe_points(self.interval, self.x0))
        return bool(np.all(np.abs(b) <= tol))

    def measure_mass(self, a, b):
        return measure_mass(self.speed, a, b, self.interval)


class ScaleValue(NamedTuple):
    s: float
    s_prime: float
    beta: float | None

    @property
    def beta_defined(self):
        return self.beta is not None


def eval_scale(spec: DiffusionSpec, x) -> ScaleValue:
    """``(s(x), s'(x), beta(x))``; ``beta`` is ``None`` for irregular raw scales."""
    x = float(x)
    if not spec.interval.contains_interior(x):
        raise OutOfDomain(f"x={x} is not in the interior of the state space")
    if x in spec.scale.singular_points:
        raise SingularPoint(f"x={x} is a declared singular point")
    xs = np.array([x])
    b = spec.beta(xs)
    return ScaleValue(float(spec.s(xs)[0]), float(spec.scale.sprime(xs)[0]), None if b is None else float(b[0]))


def measure_mass(speed: SpeedSpec, a, b, interval: StateInterval | None = None):
    """Speed mass of ``[a, b]``: density integral, atoms in ``[a, b]`` and the
    masses of closed endpoints of ``interval`` that ``[a, b]`` contains."""
    a, b = float(a), float(b)
    if a > b:
        raise DiffusionError("measure_mass needs a <= b")
    total = 0.0
    l, r = (interval.l, interval.r) if interval is not None else (-math.inf, math.inf)
    if interval is not None:
        if a == l and interval.l_closed:
            total += speed.boundary_mass_l
        if b == r and interval.r_closed:
            total += speed.boundary_mass_r
    total += sum(g for z, g in speed.atoms if a <= z <= b)
    if a == b or math.isinf(total):
        return total
    # density part; endpoints of the state space may carry integrable singularities
    lo, hi = a, b
    mid = 0.5 * (a + b)
    dens = 0.0
    for end, other, at_boundary in ((lo, mid, lo == l), (hi, mid, hi == r)):
        if at_boundary:
            v = decide_log_improper(speed.log_density, end, other)
            if v.is_infinite:
                return math.inf
            if not v.is_finite:
                raise IntegrationFailure(f"density integral near {end} undecided: {v.reason}")
            dens += v.value
        else:
            val, _ = integrate_intervals(speed.density_at, [min(end, other)], [max(end, other)], rtol=1e-10, atol=1e-14)
            dens += float(val[0])
    return total + dens


def probe_points(interval: StateInterval, x0, n=PROBE_POINTS, depth=PROBE_DEPTH):
    """Quasi-uniform probes of the interior: uniform in the geometric level
    ``t`` of :func:`geometric_points`, reaching ``depth`` levels toward each
    endpoint from ``x0``."""
    t = np.linspace(-depth, depth, n)
    out = np.empty(n)
    for side, sel in ((interval.l, t < 0), (interval.r, t >= 0)):
        k = np.abs(t[sel])
        if math.isinf(side):
            w = max(1.0, abs(x0))
            out[sel] = x0 + math.copysign(1.0, side) * w * (2.0 ** k - 1.0)
        else:
            out[sel] = side + (x0 - side) * 0.5 ** k
    return np.unique(out)


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: object
    detail: str = ""

    def __str__(self):
        return f"{self.kind} at {self.witness}: {self.detail}" if self.detail else f"{self.kind} at {self.witness}"


def validate(spec: DiffusionSpec, n_probe=PROBE_POINTS):
    """Best-effort check of the type invariants at probe resolution.

    Returns a list of :class:`Violation`; empty means no violation found.
    """
    out: list[Violation] = []
    J = spec.interval
    if not J.contains_interior(spec.x0):
        out.append(Violation("StartNotInterior", spec.x0, "x0 must lie in the open interval"))
        return out
    zs = [z for z, _ in spec.speed.atoms]
    for z, g in spec.speed.atoms:
        if not J.contains_interior(z):
            out.append(Violation("AtomNotInterior", z))
        if not g >= 0:
            out.append(Violation("NegativeAtom", z, f"gamma={g}"))
    if len(set(zs)) != len(zs):
        out.append(Violation("AtomsNotDistinct", sorted(zs)))
    for name, m in (("l", spec.speed.boundary_mass_l), ("r", spec.speed.boundary_mass_r)):
        if not m >= 0:
            out.append(Violation("NegativeBoundaryMass", name, f"mass={m}"))
    probes = probe_points(J, spec.x0, n_probe)
    probes = probes[~np.isin(probes, spec.scale.singular_points)]
    form = spec.scale.form
    if isinstance(form, ItoForm):
        av = _arr(form.a(probes)) * np.ones_like(probes)
        bad = ~(av > 0)
        if bad.any():
            out.append(Violation("NonPositiveDiffusion", float(probes[bad][0]), "a(x) <= 0"))
            return out
    try:
        ls = spec.log_sprime(probes)
    except IntegrationFailure as exc:
        out.append(Violation("ScaleNotEvaluable", None, str(exc)))
        return out
    bad = ~np.isfinite(ls)
    if bad.any():
        out.append(Violation("ScaleDerivativeNotPositive", float(probes[bad][0])))
    if isinstance(form, RawForm):
        sv = spec.s(probes)
        dec = np.nonzero(~(np.diff(sv) > 0))[0]
        if dec.size:
            out.append(Violation("ScaleNotIncreasing", (float(probes[dec[0]]), float(probes[dec[0] + 1]))))
    try:
        dens = spec.speed.density_at(probes)
    except (FloatingPointError, ValueError) as exc:
        out.append(Violation("SpeedNotEvaluable", None, str(exc)))
        return out
    neg = ~(dens >= 0)
    if neg.any():
        out.append(Violation("NegativeDensity", float(probes[neg][0])))
        return out
    try:
        # log-space so that densities like exp(-x^2) do not underflow to zero
        log_cell, _ = log_integrate_intervals(spec.speed.log_density, probes[:-1], probes[1:], rtol=1e-6)
        cell = np.where(np.isfinite(log_cell), 1.0, 0.0)
    except IntegrationFailure as exc:
        out.append(Violation("SpeedNotEvaluable", None, str(exc)))
        return out
    for z, g in spec.speed.atoms:
        if g > 0:
            # an atom at a probe point or inside a cell keeps that cell positive
            i = int(np.searchsorted(probes, z))
            cell[max(i - 1, 0): i + 1] += g
    zero = ~(cell > 0)
    if zero.any():
        # report maximal runs of zero-mass cells as one interval each
        idx = np.nonzero(zero)[0]
        runs = np.split(idx, np.nonzero(np.diff(idx) > 1)[0] + 1)
        for run in runs:
            out.append(Violation("SpeedNotPositive", (float(probes[run[0]]), float(probes[run[-1] + 1]))))
    return out
