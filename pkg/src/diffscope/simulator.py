"""Monte Carlo cross-checks via a speed-measure random walk in natural scale.

The diffusion is replaced by a nearest-neighbour walk on nodes
``x_0 < ... < x_n`` of a truncated state space.  In natural-scale
coordinates ``u_i = s(x_i)`` the walk is a martingale
(``up_prob = (u_i - u_{i-1}) / (u_{i+1} - u_{i-1})``), and the time spent at
a node before each jump is the expected exit time of the diffusion from
``(x_{i-1}, x_{i+1})``, i.e. the Green function of that cell integrated
against the speed measure, atoms included.  Exit-time means are therefore
exact on the grid, and sticky points need no special treatment.

Along each path the candidate density process is accumulated in log space,
``log Z += theta_i dU - theta_i**2 dU**2 / 2`` per jump from node ``i`` with
``theta = beta / (2 s')``.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import numba
from numba import njit, prange

from .boundary import ACCESSIBLE, LOWER, UPPER, feller_accessibility
from .model import DiffusionSpec, RawForm, ScaleSpec, SpeedSpec
from .quadrature import KRONROD_WEIGHTS, NODES
from .rng import stream_key, uniform_at

__all__ = [
    "DegenerateTruncation",
    "PreconditionFailed",
    "GridModel",
    "PathStats",
    "PathRecord",
    "SMDStats",
    "GapEstimate",
    "ExitStats",
    "INTERIOR",
    "ABSORBING",
    "SENTINEL",
    "REFLECTING",
    "default_truncation",
    "build_grid",
    "simulate_paths",
    "simulate_path",
    "estimate_exit",
    "estimate_smd",
    "candidate_spec",
    "estimate_candidate_martingale_gap",
    "discrete_occupation_identity_check",
]

INTERIOR, ABSORBING, SENTINEL, REFLECTING = 0, 1, 2, 3
# cap on contamination by truncation sentinels for a run to count as valid
MAX_CONTAMINATION = 1e-3


class DegenerateTruncation(ValueError):
    pass


class PreconditionFailed(ValueError):
    pass


@dataclass(frozen=True)
class GridModel:
    x_nodes: np.ndarray
    u_nodes: np.ndarray
    up_prob: np.ndarray
    hold_mean: np.ndarray
    theta: np.ndarray
    kind: np.ndarray
    start_index: int
    h: float
    truncation_artifact: tuple = (False, False)
    notes: tuple = ()

    @property
    def n_nodes(self):
        return self.x_nodes.size

    @property
    def has_theta(self):
        return bool(np.all(np.isfinite(self.theta)))

    def metadata(self):
        return {
            "n_nodes": int(self.n_nodes),
            "h": self.h,
            "x_range": [float(self.x_nodes[0]), float(self.x_nodes[-1])],
            "x0": float(self.x_nodes[self.start_index]),
            "end_kinds": [_KIND_NAMES[int(self.kind[0])], _KIND_NAMES[int(self.kind[-1])]],
            "truncation_artifact": list(self.truncation_artifact),
            "max_hold_mean": float(self.hold_mean.max()),
            "notes": list(self.notes),
        }


_KIND_NAMES = {INTERIOR: "interior", ABSORBING: "absorbing", SENTINEL: "truncation_artifact", REFLECTING: "reflecting"}


# --- grid construction --------------------------------------------------------


def default_truncation(spec: DiffusionSpec, width=8.0, depth=1e-4):
    """A truncation interval around ``x0``: ``width * max(1, |x0|)`` towards
    an infinite boundary, the boundary itself when it is finite and
    accessible, otherwise a fraction ``depth`` of the distance to it."""
    ends = []
    for side, b, sign in ((LOWER, spec.l, -1.0), (UPPER, spec.r, 1.0)):
        if math.isinf(b):
            ends.append(spec.x0 + sign * width * max(1.0, abs(spec.x0)))
            continue
        acc, _ = feller_accessibility(spec, side)
        ends.append(b if acc == ACCESSIBLE else b + (spec.x0 - b) * depth)
    return tuple(ends)


def _step_rule(spec, h, beta_cap, relative_cap, refine):
    """Target node spacing as a function of ``x``: about ``h`` in units of
    the local volatility, capped where ``beta`` is large and, geometrically,
    toward truncated boundaries."""

    def rule(x):
        with np.errstate(over="ignore", divide="ignore"):
            dx = h * np.exp(-0.5 * spec.log_sprime_density(x))
            if spec.scale.has_beta:
                dx = np.minimum(dx, beta_cap / np.maximum(np.abs(spec.beta(x)), 1e-300))
        for b in refine:
            dx = np.minimum(dx, relative_cap * np.abs(x - b))
        return dx

    return rule


def _place_nodes(p, q, rule, n_samples=4000):
    """Nodes from ``p`` to ``q`` (inclusive) whose spacing follows ``rule``."""
    L = q - p
    t = np.unique(np.concatenate([np.linspace(0.0, 1.0, n_samples), np.geomspace(1e-10, 1.0, n_samples)]))
    xs = np.unique(np.concatenate([p + L * t, q - L * t]))
    xs = xs[(xs >= p) & (xs <= q)]
    dens = 1.0 / rule(xs)
    if not np.all(np.isfinite(dens)) or np.any(dens <= 0):
        raise DegenerateTruncation(f"node spacing not computable on [{p}, {q}]")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    # tolerate quadrature roundoff so that e.g. length/h = 100 gives 100 steps
    n = max(1, int(math.ceil(cum[-1] * (1.0 - 1e-9))))
    nodes = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, xs)
    nodes[0], nodes[-1] = p, q
    return nodes


def _hermite_offsets(t, L, pa, pb, du):
    """``s(x) - s(a)`` from cubic Hermite data on ``[a, a + L]`` at ``t = (x - a)/L``."""
    h10 = t ** 3 - 2 * t ** 2 + t
    h01 = -2 * t ** 3 + 3 * t ** 2
    h11 = t ** 3 - t ** 2
    return L * (h10 * pa + h11 * pb) + h01 * du


def _half_cell_integrals(spec, x, u, sp):
    """For each cell ``[x_j, x_{j+1}]`` return
    ``A_j = int (s(y) - u_j) rho(y) dy`` and ``B_j = int (u_{j+1} - s(y)) rho(y) dy``."""
    a, b = x[:-1], x[1:]
    L = b - a
    du = np.diff(u)
    t = 0.5 * (NODES[None, :] + 1.0)
    pts = a[:, None] + L[:, None] * t
    with np.errstate(over="ignore", under="ignore"):
        rho = np.exp(spec.speed.log_density(pts.ravel())).reshape(pts.shape)
    off = _hermite_offsets(t, L[:, None], sp[:-1, None], sp[1:, None], du[:, None])
    off = np.clip(off, 0.0, du[:, None])
    w = 0.5 * L[:, None] * KRONROD_WEIGHTS[None, :]
    A = np.sum(w * off * rho, axis=1)
    B = np.sum(w * (du[:, None] - off) * rho, axis=1)
    return A, B


def build_grid(
    spec: DiffusionSpec,
    h,
    truncation=None,
    *,
    exit_interval=False,
    beta_cap=0.1,
    relative_cap=0.1,
) -> GridModel:
    """Walk on a truncated state space.

    ``truncation = (lo, hi)`` must contain ``x0``.  An end equal to a finite
    accessible boundary becomes that boundary (absorbing for infinite
    boundary mass, reflecting otherwise); any other end is an absorbing
    sentinel marked as a truncation artifact.  With ``exit_interval=True``
    both ends are plain absorbing barriers (exit-time problems).

    Node spacing is about ``h`` times the local volatility ``sqrt(a)``, so
    for Brownian motion the grid is uniform with step ``h`` and every mean
    holding time is ``h**2``; it is refined so that ``|beta| dx <=
    beta_cap`` and, geometrically, toward truncated finite boundaries.  The
    start point and every atom inside the truncation are nodes.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    lo, hi = truncation if truncation is not None else default_truncation(spec)
    lo, hi = float(lo), float(hi)
    x0 = spec.x0
    if not (lo < x0 < hi) or math.isinf(lo) or math.isinf(hi) or lo < spec.l or hi > spec.r:
        raise DegenerateTruncation(f"truncation ({lo}, {hi}) must be finite, inside the state space and contain x0={x0}")

    kinds, artifact, refine, masses = [], [], [], []
    for side, end, b, mass in ((LOWER, lo, spec.l, spec.speed.boundary_mass_l), (UPPER, hi, spec.r, spec.speed.boundary_mass_r)):
        if exit_interval and end != b:
            kinds.append(ABSORBING)
            artifact.append(False)
        elif end == b:
            acc, _ = feller_accessibility(spec, side)
            if acc != ACCESSIBLE:
                raise DegenerateTruncation(f"{side} boundary {b} is not accessible; truncate strictly inside it")
            if exit_interval or math.isinf(mass):
                kinds.append(ABSORBING)
            else:
                kinds.append(REFLECTING)
            artifact.append(False)
        else:
            kinds.append(SENTINEL)
            artifact.append(True)
            if not math.isinf(b):
                refine.append(b)
        masses.append(mass)

    atoms = [(z, g) for z, g in spec.speed.atoms if lo < z < hi and g > 0]
    breaks = sorted({lo, hi, x0, *[z for z, _ in atoms]})
    rule = _step_rule(spec, h, beta_cap, relative_cap, refine)
    pieces = [_place_nodes(p, q, rule) for p, q in zip(breaks[:-1], breaks[1:])]
    x = np.concatenate([pieces[0]] + [pc[1:] for pc in pieces[1:]])
    if np.any(np.diff(x) <= 0):
        raise DegenerateTruncation("node spacing underflows floating point; use a coarser truncation")
    n = x.size
    i0 = int(np.searchsorted(x, x0))

    u = np.asarray(spec.s(x), dtype=float)
    sp = np.exp(spec.log_sprime(x))
    du = np.diff(u)
    if not (np.all(np.isfinite(u)) and np.all(du > 0)):
        raise DegenerateTruncation("scale function not strictly increasing in floating point on the grid")

    A, B = _half_cell_integrals(spec, x, u, sp)
    up = np.zeros(n)
    hold = np.zeros(n)
    span = u[2:] - u[:-2]
    up[1:-1] = du[:-1] / span
    hold[1:-1] = 2.0 * (du[1:] * A[:-1] + du[:-1] * B[1:]) / span
    for z, g in atoms:
        i = int(np.searchsorted(x, z))
        hold[i] += g * 2.0 * du[i - 1] * du[i] / span[i - 1]

    kind = np.full(n, INTERIOR, dtype=np.int8)
    kind[0], kind[-1] = kinds
    if kinds[0] == REFLECTING:
        up[0] = 1.0
        hold[0] = 2.0 * du[0] * masses[0] + 2.0 * B[0]
    if kinds[1] == REFLECTING:
        up[-1] = 0.0
        hold[-1] = 2.0 * du[-1] * masses[1] + 2.0 * A[-1]

    if spec.scale.has_beta:
        theta = np.asarray(spec.beta(x), dtype=float) / (2.0 * sp)
    else:
        theta = np.full(n, np.nan)
    notes = []
    if artifact[0] or artifact[1]:
        notes.append("sentinel ends absorb paths that leave the truncation; such paths are counted as contaminated")
    return GridModel(x, u, up, hold, theta, kind, i0, float(h), tuple(artifact), tuple(notes))


# --- path kernels -------------------------------------------------------------

# numba falls back to another threading layer when the installed TBB is too old;
# try the OpenMP and workqueue layers first so that probe never runs
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ and numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
warnings.filterwarnings("ignore", message="The TBB threading layer requires", category=numba.NumbaWarning)


@njit(cache=True, parallel=True)
def _run_paths(u, up, hold, theta, kind, i0, T, n_paths, seed, path_offset, exponential, max_steps,
               final_index, final_time, end_kind, log_z, min_log_z, quad, n_steps):
    for p in prange(n_paths):
        key = stream_key(seed, path_offset + np.uint64(p))
        counter = 0
        i = i0
        t = 0.0
        lz = 0.0
        comp = 0.0
        lz_min = 0.0
        q = 0.0
        steps = 0
        ek = 0
        while True:
            k = kind[i]
            if k == 1 or k == 2:
                ek = k
                break
            dt = hold[i]
            if exponential:
                dt = -dt * math.log(1.0 - uniform_at(key, counter))
                counter += 1
            if t + dt > T:
                t = T
                break
            if steps >= max_steps:
                ek = 3
                break
            t += dt
            r = uniform_at(key, counter)
            counter += 1
            if r < up[i]:
                d = u[i + 1] - u[i]
                j = i + 1
            else:
                d = u[i - 1] - u[i]
                j = i - 1
            th = theta[i]
            if th != 0.0:
                inc = th * d - 0.5 * th * th * d * d
                # compensated summation of the log density
                y = inc - comp
                s = lz + y
                comp = (s - lz) - y
                lz = s
                if lz < lz_min:
                    lz_min = lz
                q += th * th * d * d
            i = j
            steps += 1
        final_index[p] = i
        final_time[p] = t
        end_kind[p] = ek
        log_z[p] = lz
        min_log_z[p] = lz_min
        quad[p] = q
        n_steps[p] = steps


@njit(cache=True)
def _trace_path(u, up, hold, kind, i0, T, seed, path_index, exponential, max_steps, nodes_out, dirs_out):
    """Single path recording the departure node and direction of every jump.
    Uses the same random stream as :func:`_run_paths`."""
    key = stream_key(seed, path_index)
    counter = 0
    i = i0
    t = 0.0
    n = 0
    while True:
        k = kind[i]
        if k == 1 or k == 2:
            break
        dt = hold[i]
        if exponential:
            dt = -dt * math.log(1.0 - uniform_at(key, counter))
            counter += 1
        if t + dt > T or n >= max_steps or n >= nodes_out.size:
            break
        t += dt
        r = uniform_at(key, counter)
        counter += 1
        nodes_out[n] = i
        if r < up[i]:
            dirs_out[n] = 1
            i += 1
        else:
            dirs_out[n] = -1
            i -= 1
        n += 1
    return n, i, t


@dataclass
class PathStats:
    """Per-path outcomes of :func:`simulate_paths`.

    ``end_kind`` is 0 (alive at ``T``), 1 (absorbed at a boundary or exit
    barrier), 2 (hit a truncation sentinel) or 3 (step budget exhausted).
    ``final_time`` is the absorption time, or ``T`` for paths alive at ``T``.
    """

    grid: GridModel = field(repr=False)
    T: float
    seed: int
    final_index: np.ndarray
    final_time: np.ndarray
    end_kind: np.ndarray
    log_z: np.ndarray
    min_log_z: np.ndarray
    quad: np.ndarray
    n_steps: np.ndarray

    @property
    def n_paths(self):
        return self.final_index.size

    @property
    def final_x(self):
        return self.grid.x_nodes[self.final_index]

    @property
    def contaminated(self):
        return (self.end_kind == SENTINEL) | (self.end_kind == 3)

    @property
    def contamination(self):
        return float(np.mean(self.contaminated))

    def occupation(self):
        """Number of departures from each node, summed over paths."""
        counts = np.zeros(self.grid.n_nodes, dtype=np.int64)
        for p in range(self.n_paths):
            rec = simulate_path(self.grid, self.T, self.seed, p)
            np.add.at(counts, rec.nodes, 1)
        return counts


DEFAULT_MAX_STEPS = 2_000_000_000


def simulate_paths(grid: GridModel, T, n_paths, seed, *, exponential=False, max_steps=DEFAULT_MAX_STEPS, path_offset=0) -> PathStats:
    """Run ``n_paths`` independent walks up to time ``T`` (``math.inf`` runs
    until absorption).  Path ``p`` uses stream ``(seed, path_offset + p)``."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not T > 0:
        raise ValueError("T must be positive")
    if math.isinf(T) and not (grid.kind[0] in (ABSORBING, SENTINEL) or grid.kind[-1] in (ABSORBING, SENTINEL)):
        raise ValueError("an infinite horizon needs an absorbing end")
    n = int(n_paths)
    final_index = np.empty(n, dtype=np.int64)
    final_time = np.empty(n)
    end_kind = np.empty(n, dtype=np.int8)
    log_z = np.empty(n)
    min_log_z = np.empty(n)
    quad = np.empty(n)
    n_steps = np.empty(n, dtype=np.int64)
    theta = np.where(np.isfinite(grid.theta), grid.theta, 0.0)
    _run_paths(grid.u_nodes, grid.up_prob, grid.hold_mean, theta, grid.kind, grid.start_index, float(T), n,
               np.uint64(seed), np.uint64(path_offset), bool(exponential), np.int64(max_steps),
               final_index, final_time, end_kind, log_z, min_log_z, quad, n_steps)
    return PathStats(grid, float(T), int(seed), final_index, final_time, end_kind, log_z, min_log_z, quad, n_steps)


@dataclass(frozen=True)
class PathRecord:
    """Jump sequence of one path: departure node and direction (+1/-1).

    ``final_time`` is the time of the last completed jump, not ``T``.
    """

    nodes: np.ndarray
    directions: np.ndarray
    final_index: int
    final_time: float


def simulate_path(grid: GridModel, T, seed, path_index=0, *, exponential=False, max_jumps=50_000_000) -> PathRecord:
    cap = 1 << 16
    while True:
        nodes = np.empty(cap, dtype=np.int64)
        dirs = np.empty(cap, dtype=np.int8)
        n, i, t = _trace_path(grid.u_nodes, grid.up_prob, grid.hold_mean, grid.kind, grid.start_index, float(T),
                              np.uint64(seed), np.uint64(path_index), bool(exponential), np.int64(max_jumps), nodes, dirs)
        if n < cap or cap >= max_jumps:
            return PathRecord(nodes[:n].copy(), dirs[:n].copy(), int(i), float(t))
        cap *= 4


# --- estimators ---------------------------------------------------------------


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    mean = math.fsum(v) / v.size
    if v.size < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2) / (v.size - 1)
    return mean, math.sqrt(var / v.size)


@dataclass(frozen=True)
class ExitStats:
    n_paths: int
    mean_exit_time: float
    std_err: float
    frac_upper: float
    frac_upper_std_err: float
    frac_unfinished: float
    grid: dict

    def to_dict(self):
        return dict(self.__dict__)


def estimate_exit(grid: GridModel, n_paths, seed, *, exponential=False, max_steps=DEFAULT_MAX_STEPS) -> ExitStats:
    """Mean exit time from the grid interval and the probability of leaving
    through the upper end."""
    ps = simulate_paths(grid, math.inf, n_paths, seed, exponential=exponential, max_steps=max_steps)
    done = ps.end_kind != 3
    m, se = _mean_se(ps.final_time[done])
    upper = (ps.final_index[done] == grid.n_nodes - 1).astype(float)
    pu, pse = _mean_se(upper)
    return ExitStats(ps.n_paths, m, se, pu, pse, float(np.mean(~done)), grid.metadata())


@dataclass(frozen=True)
class SMDStats:
    n_paths: int
    n_used: int
    mean_Z_T: float
    std_err_Z_T: float
    min_Z_quantiles: dict
    frac_absorbed: float
    frac_contaminated: float
    valid: bool
    eps: float
    frac_Z_below: float
    mean_quadratic_term: float
    overshoot_bound: float
    T: float
    seed: int
    grid: dict

    def to_dict(self):
        return dict(self.__dict__)


MIN_Z_LEVELS = (0.001, 0.01, 0.1, 0.5)


def estimate_smd(grid: GridModel, T, n_paths, seed, eps_floor=1e-12, *, exponential=False) -> SMDStats:
    """Mean of the candidate density ``Z_T`` over paths that stay inside the
    truncation, with its standard error, plus positivity diagnostics."""
    if not grid.has_theta:
        raise PreconditionFailed("beta is not available for this scale function")
    ps = simulate_paths(grid, T, n_paths, seed, exponential=exponential)
    used = ~ps.contaminated
    lz = ps.log_z[used]
    z = np.exp(lz)
    m, se = _mean_se(z)
    mins = np.exp(ps.min_log_z[used])
    qs = {str(q): float(np.quantile(mins, q)) for q in MIN_Z_LEVELS} if mins.size else {}
    contamination = ps.contamination
    return SMDStats(
        n_paths=ps.n_paths,
        n_used=int(used.sum()),
        mean_Z_T=m,
        std_err_Z_T=se,
        min_Z_quantiles=qs,
        frac_absorbed=float(np.mean(ps.end_kind == ABSORBING)),
        frac_contaminated=contamination,
        valid=contamination <= MAX_CONTAMINATION,
        eps=float(eps_floor),
        frac_Z_below=float(np.mean(lz < math.log(eps_floor))) if lz.size else math.nan,
        mean_quadratic_term=_mean_se(ps.quad[used])[0],
        overshoot_bound=float(grid.hold_mean.max()),
        T=float(T),
        seed=int(seed),
        grid=grid.metadata(),
    )


def candidate_spec(spec: DiffusionSpec) -> DiffusionSpec:
    """The diffusion in natural scale with speed measure ``s' dm``, finite
    boundaries absorbing."""

    def ident(x):
        return np.asarray(x, dtype=float)

    def one(x):
        return np.ones_like(np.asarray(x, dtype=float))

    def zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    atoms = tuple((z, g * float(np.exp(spec.log_sprime(np.array([z]))[0]))) for z, g in spec.speed.atoms)
    speed = SpeedSpec(
        atoms=atoms,
        boundary_mass_l=math.inf if not math.isinf(spec.l) else 0.0,
        boundary_mass_r=math.inf if not math.isinf(spec.r) else 0.0,
        log_density_fn=spec.log_sprime_density,
    )
    return DiffusionSpec(spec.interval, ScaleSpec(RawForm(ident, one, zero, natural=True)), speed, spec.x0)


@dataclass(frozen=True)
class GapEstimate:
    gap: float
    std_err: float
    mean_X_T: float
    n_paths: int
    n_used: int
    frac_absorbed: float
    frac_contaminated: float
    valid: bool
    T: float
    seed: int
    grid: dict

    def to_dict(self):
        return dict(self.__dict__)


def estimate_candidate_martingale_gap(spec: DiffusionSpec, T, n_paths, seed, *, h=0.01, truncation=None,
                                      check=True, exponential=False) -> GapEstimate:
    """``E[X_T] - x0`` for the candidate diffusion of :func:`candidate_spec`.

    Zero (within Monte Carlo error) is what a true martingale gives; a
    significantly negative gap signals a strict local martingale.
    """
    if check:
        from .classifier import Truth, regularity_condition

        reg = regularity_condition(spec)
        if reg.value is not Truth.HOLDS:
            raise PreconditionFailed(f"regularity condition is {reg.value.value}; candidate law undefined")
    cand = candidate_spec(spec)
    grid = build_grid(cand, h, truncation if truncation is not None else default_truncation(cand))
    ps = simulate_paths(grid, T, n_paths, seed, exponential=exponential)
    used = ~ps.contaminated
    m, se = _mean_se(ps.final_x[used])
    contamination = ps.contamination
    return GapEstimate(
        gap=m - spec.x0,
        std_err=se,
        mean_X_T=m,
        n_paths=ps.n_paths,
        n_used=int(used.sum()),
        frac_absorbed=float(np.mean(ps.end_kind == ABSORBING)),
        frac_contaminated=contamination,
        valid=contamination <= MAX_CONTAMINATION,
        T=float(T),
        seed=int(seed),
        grid=grid.metadata(),
    )


def discrete_occupation_identity_check(grid: GridModel, path: PathRecord):
    """Compare the quadratic term summed jump by jump with the same term
    summed node by node (visit counts times squared step times theta^2).

    Both sides are the correctly rounded value of the same exact sum, so the
    returned ``diff`` is exactly zero.
    """
    if not grid.has_theta:
        raise PreconditionFailed("beta is not available for this scale function")
    nodes, dirs = path.nodes, path.directions.astype(np.int64)
    th = grid.theta
    d = grid.u_nodes[nodes + dirs] - grid.u_nodes[nodes]
    terms = (th[nodes] * d) ** 2
    lhs = math.fsum(terms.tolist())
    # node-by-node: one term per (node, direction) times its count
    key = nodes * 2 + (dirs > 0)
    uniq, counts = np.unique(key, return_counts=True)
    rhs_exact = Fraction(0)
    for k, c in zip(uniq.tolist(), counts.tolist()):
        i, up = divmod(k, 2)
        step = grid.u_nodes[i + 1] - grid.u_nodes[i] if up else grid.u_nodes[i - 1] - grid.u_nodes[i]
        rhs_exact += c * Fraction(float((th[i] * step) ** 2))
    rhs = float(rhs_exact)
    return lhs, rhs, lhs - rhs
