"""Input-design methods over box-rate polytopes and per-step energy balls.

Five designs are provided:

* ``design_bd``  - maximize the summed pair distances (probability-blind),
* ``design_qta`` - minimize the weighted second-order expansion of the bound,
* ``design_bc``  - minimize the weighted coefficient bound at the full horizon,
* ``design_sbc`` - minimize the bound summed over nested input prefixes,
* ``design_ol``  - one long-horizon minimization of the full-horizon bound,
  whose sequence is then consumed open loop.

On a polytope every objective is evaluated by exhaustive vertex search, which
is exact whenever the objective is concave (certified or not, the coefficient
objectives are scored at the vertices).  On energy balls a
linearize-and-minimize loop (``fw_concave_min``) is used: the tangent plane of
a concave objective is a global upper bound, so its constrained minimizer can
only improve the value, and extreme points of the ball product are reached in
closed form.  Certificates from :mod:`clafd.concavity` are attached where the
concavity theory applies.
"""

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from . import _kernels as kernels
from . import concavity
from .beliefs import BeliefState
from .bhattacharyya import (PairQuadratic, all_pairs, bhatt_distance,
                            pair_weights, shift_quadratic, stack_pairs,
                            taylor_form, weighted_bound)
from .models import build_lifted

VERTEX_CAP = 10 ** 6


@dataclass(frozen=True)
class BoxRatePolytope:
    """Per-step amplitude bound and step-to-step rate bound, per channel."""

    amp_bound: float
    rate_bound: float
    u_prev: tuple
    horizon: int

    def __post_init__(self):
        if self.amp_bound <= 0 or self.rate_bound <= 0:
            raise ValueError("amplitude and rate bounds must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        object.__setattr__(self, "u_prev", tuple(float(v) for v in np.atleast_1d(self.u_prev)))

    @property
    def n_u(self) -> int:
        return len(self.u_prev)

    @property
    def m(self) -> int:
        return self.horizon * self.n_u


@dataclass(frozen=True)
class EnergyBallProduct:
    """Per-step ball |u_l - center|^2 <= energy_bound."""

    energy_bound: float
    center: tuple
    horizon: int

    def __post_init__(self):
        if self.energy_bound <= 0:
            raise ValueError("energy bound must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))

    @property
    def n_u(self) -> int:
        return len(self.center)

    @property
    def m(self) -> int:
        return self.horizon * self.n_u

    @property
    def stacked_center(self) -> np.ndarray:
        return np.tile(np.asarray(self.center), self.horizon)


ConstraintSet = BoxRatePolytope | EnergyBallProduct


@dataclass(frozen=True)
class DesignResult:
    """Designed input sequence with its concavity certificate."""

    u_seq: np.ndarray
    first_input: np.ndarray
    objective_value: float
    certified_concave: str  # "yes" | "no" | "na"
    iterations: int


def contains(cs: ConstraintSet, u, tol: float = 1e-9) -> bool:
    """Feasibility of a stacked input for the constraint set."""
    u = np.asarray(u, dtype=float).reshape(cs.horizon, cs.n_u)
    if isinstance(cs, EnergyBallProduct):
        d = u - np.asarray(cs.center)
        return bool(np.all(np.einsum("ij,ij->i", d, d) <= cs.energy_bound + tol))
    prev = np.asarray(cs.u_prev)
    if np.any(np.abs(u) > cs.amp_bound + tol):
        return False
    steps = np.vstack([prev, u])
    return bool(np.all(np.abs(np.diff(steps, axis=0)) <= cs.rate_bound + tol))


def feasible_clip(cs: ConstraintSet, u) -> np.ndarray:
    """Map an arbitrary sequence onto the constraint set.

    For the ball product each step is radially scaled toward its center.  For
    the box-rate polytope each channel is swept forward, clipping every step
    into the interval allowed by the previous (already clipped) value.
    """
    u = np.asarray(u, dtype=float).reshape(cs.horizon, cs.n_u).copy()
    if isinstance(cs, EnergyBallProduct):
        center = np.asarray(cs.center)
        d = u - center
        norms = np.sqrt(np.einsum("ij,ij->i", d, d))
        radius = np.sqrt(cs.energy_bound)
        scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
        return (center + d * scale[:, None]).reshape(-1)
    prev = np.array(cs.u_prev, dtype=float)
    for step in range(cs.horizon):
        lo = np.maximum(-cs.amp_bound, prev - cs.rate_bound)
        hi = np.minimum(cs.amp_bound, prev + cs.rate_bound)
        u[step] = np.clip(u[step], lo, hi)
        prev = u[step]
    return u.reshape(-1)


# ---------------------------------------------------------------------------
# vertex enumeration
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _channel_vertices(amp: float, rate: float, prev: float, N: int) -> tuple:
    """Exact vertex values of one scalar box-rate chain.

    A vertex activates one independent constraint per step.  Active rate
    constraints form maximal runs of consecutive steps; each run is pinned
    either by the fixed previous input (runs starting at step 1) or by exactly
    one amplitude anchor at one of its nodes, from which the chained values
    propagate in both directions.  Steps outside every run sit on an amplitude
    bound themselves.  Enumerating these spanning structures and pruning to
    feasibility yields the exact vertex set (a forward-only scan would miss
    vertices whose early values are back-propagated from a later anchor).
    """
    tol = 1e-9
    found = {}
    for mask in range(2 ** N):
        active = [step for step in range(1, N + 1) if mask & (1 << (step - 1))]
        runs = []
        for step in active:
            if runs and runs[-1][-1] == step - 1:
                runs[-1].append(step)
            else:
                runs.append([step])
        covered = set()
        options = []
        for run in runs:
            a, bb = run[0], run[-1]
            covered.update(range(max(a - 1, 1), bb + 1))
            length = bb - a + 1
            vals_list = []
            if a == 1:
                for pol in itertools.product((rate, -rate), repeat=length):
                    vals = {}
                    cur = prev
                    for t, p in zip(range(a, bb + 1), pol):
                        cur += p
                        vals[t] = cur
                    vals_list.append(vals)
            else:
                for anchor in range(a - 1, bb + 1):
                    for ext in (amp, -amp):
                        for pol in itertools.product((rate, -rate), repeat=length):
                            vals = {anchor: ext}
                            cur = ext
                            for t in range(anchor + 1, bb + 1):
                                cur += pol[t - a]
                                vals[t] = cur
                            cur = ext
                            for t in range(anchor - 1, a - 2, -1):
                                cur -= pol[t + 1 - a]
                                vals[t] = cur
                            vals_list.append(vals)
            options.append(vals_list)
        for step in range(1, N + 1):
            if step not in covered:
                options.append([{step: amp}, {step: -amp}])
        for combo in itertools.product(*options):
            vec = np.empty(N)
            for vals in combo:
                for t, v in vals.items():
                    vec[t - 1] = v
            if np.any(np.abs(vec) > amp + tol):
                continue
            diffs = np.diff(np.concatenate([[prev], vec]))
            if np.any(np.abs(diffs) > rate + tol):
                continue
            found.setdefault(tuple(np.round(vec, 12)), vec)
    return tuple(sorted(found.values(), key=tuple))


def enumerate_vertices(cs: BoxRatePolytope, cap: int = VERTEX_CAP) -> np.ndarray:
    """All vertices of the box-rate polytope, lexicographically sorted."""
    if not isinstance(cs, BoxRatePolytope):
        raise TypeError("vertex enumeration requires a box-rate polytope")
    cached = _vertex_cache.get(cs)
    if cached is not None:
        if cached.shape[0] > cap:
            raise ValueError(f"vertex count {cached.shape[0]} exceeds cap {cap}")
        return cached
    per_channel = [_channel_vertices(cs.amp_bound, cs.rate_bound, p, cs.horizon)
                   for p in cs.u_prev]
    count = int(np.prod([len(v) for v in per_channel]))
    if count > cap:
        raise ValueError(f"vertex count {count} exceeds cap {cap}")
    out = np.empty((count, cs.m))
    for idx, combo in enumerate(itertools.product(*per_channel)):
        for ch, vals in enumerate(combo):
            out[idx, ch::cs.n_u] = vals
    order = np.lexsort(out.T[::-1])
    result = np.ascontiguousarray(out[order])
    result.setflags(write=False)
    if len(_vertex_cache) > 512:
        _vertex_cache.clear()
    _vertex_cache[cs] = result
    return result


def _prefix_view(cs: BoxRatePolytope, L: int) -> np.ndarray:
    """Contiguous view of the first L steps of the vertex array, cached."""
    key = (cs, L)
    cached = _prefix_view_cache.get(key)
    if cached is None:
        cached = np.ascontiguousarray(enumerate_vertices(cs)[:, :L * cs.n_u])
        cached.setflags(write=False)
        if len(_prefix_view_cache) > 2048:
            _prefix_view_cache.clear()
        _prefix_view_cache[key] = cached
    return cached


_vertex_cache: dict = {}
_prefix_view_cache: dict = {}


# ---------------------------------------------------------------------------
# linearize-and-minimize
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FwResult:
    u: np.ndarray
    value: float
    iterations: int
    trace: tuple


def _linear_min(cs: ConstraintSet, g: np.ndarray, vertices=None) -> np.ndarray:
    """argmin <g, u> over the constraint set (centered ball coordinates)."""
    if isinstance(cs, BoxRatePolytope):
        return vertices[int(np.argmin(vertices @ g))]
    g = g.reshape(cs.horizon, cs.n_u)
    norms = np.sqrt(np.einsum("ij,ij->i", g, g))
    radius = np.sqrt(cs.energy_bound)
    scale = np.where(norms > 0, -radius / np.maximum(norms, 1e-300), 0.0)
    return (g * scale[:, None]).reshape(-1)


def fw_concave_min(value_fn, grad_fn, cs: ConstraintSet, starts,
                   max_iter: int = 200, tol: float = 1e-12) -> FwResult:
    """Minimize by repeatedly jumping to the minimizer of the tangent plane.

    Steps are accepted only when the value decreases, so the recorded value
    sequence is non-increasing; for concave objectives the full jump is the
    best point on the segment, otherwise a halving backtrack along the segment
    is attempted before giving up.  Runs every start and keeps the best end
    point (earlier start wins ties).
    """
    vertices = enumerate_vertices(cs) if isinstance(cs, BoxRatePolytope) else None
    best = None
    for start in starts:
        u = np.asarray(start, dtype=float).reshape(-1)
        val = float(value_fn(u))
        if not np.isfinite(val):
            raise ValueError("objective is not finite at a start point")
        trace = [val]
        iters = 0
        for _ in range(max_iter):
            g = grad_fn(u)
            s = _linear_min(cs, g, vertices)
            moved = False
            gamma = 1.0
            for _ in range(20):
                cand = u + gamma * (s - u)
                cval = float(value_fn(cand))
                if cval < val - tol:
                    u, val = cand, cval
                    trace.append(val)
                    moved = True
                    break
                gamma *= 0.5
            iters += 1
            if not moved:
                break
        if best is None or val < best.value:
            best = FwResult(u=u, value=val, iterations=iters, trace=tuple(trace))
    if best is None:
        raise ValueError("at least one start point is required")
    return best


def _ball_starts(pairs, cs: EnergyBallProduct, rng, eig_starts: bool = False):
    """Multi-start set in centered coordinates: origin, per-pair linear
    directions pushed to the boundary, optionally top-curvature directions,
    and three random feasible points."""
    radius = np.sqrt(cs.energy_bound)

    def boundary(direction):
        d = direction.reshape(cs.horizon, cs.n_u)
        norms = np.sqrt(np.einsum("ij,ij->i", d, d))
        scale = np.where(norms > 0, radius / np.maximum(norms, 1e-300), 0.0)
        return (d * scale[:, None]).reshape(-1)

    starts = [np.zeros(cs.m)]
    for pq in pairs:
        if np.linalg.norm(pq.c) > 0:
            starts.append(boundary(-pq.c))
        if eig_starts:
            _, vec = np.linalg.eigh(pq.H)
            top = vec[:, -1]
            starts.append(boundary(top))
            starts.append(boundary(-top))
    if rng is None:
        rng = np.random.default_rng(0)
    for _ in range(3):
        pts = rng.standard_normal((cs.horizon, cs.n_u))
        norms = np.sqrt(np.einsum("ij,ij->i", pts, pts))
        radii = radius * rng.uniform(0, 1, cs.horizon) ** (1.0 / cs.n_u)
        pts = pts / np.maximum(norms, 1e-300)[:, None] * radii[:, None]
        starts.append(pts.reshape(-1))
    return starts


def _centered(pairs, cs: ConstraintSet):
    """Shift pair quadratics into ball-centered coordinates when needed."""
    if isinstance(cs, EnergyBallProduct) and np.any(np.asarray(cs.center) != 0.0):
        offset = cs.stacked_center
        return [shift_quadratic(pq, offset) for pq in pairs], offset
    return list(pairs), np.zeros(cs.m)


def _certificate(pairs, cs: ConstraintSet, vertices=None) -> str:
    """Aggregate tri-state certificate over all pairs (and all sets passed)."""
    ok = True
    for pq in pairs:
        spec = concavity.spectrum(pq)
        if isinstance(cs, BoxRatePolytope):
            res = concavity.check_polytope(pq, spec, vertices)
        else:
            res = concavity.check_energy_ball(pq, spec, cs.energy_bound, cs.horizon)
        if res is not True:
            ok = False
    return "yes" if ok else "no"


# ---------------------------------------------------------------------------
# the design methods
# ---------------------------------------------------------------------------

def _trivial_result(cs: ConstraintSet, cert: str = "na") -> DesignResult:
    """Center / zero design for degenerate problems (fewer than two models)."""
    offset = cs.stacked_center if isinstance(cs, EnergyBallProduct) else np.zeros(cs.m)
    u = feasible_clip(cs, offset)
    return DesignResult(u_seq=u, first_input=u[:cs.n_u], objective_value=0.0,
                        certified_concave=cert, iterations=0)


def design_bd(pairs, cs: ConstraintSet, rng=None) -> DesignResult:
    """Maximize the summed pair distances (equivalently minimize their negative)."""
    if not pairs:
        return _trivial_result(cs)
    pairs_c, offset = _centered(pairs, cs)
    H, c, h = stack_pairs(pairs_c)

    if isinstance(cs, BoxRatePolytope):
        vertices = enumerate_vertices(cs)
        totals = kernels.quad_batch_eval(H, c, h, vertices).sum(axis=0)
        u = vertices[int(np.argmax(totals))]
        iters = 0
    else:
        cs_c = replace(cs, center=tuple(0.0 for _ in range(cs.n_u)))

        def value(u):
            return -float(kernels.quad_batch_eval(H, c, h, u[None, :]).sum())

        def grad(u):
            return -(2.0 * np.einsum("pij,j->i", H, u) + c.sum(axis=0))

        res = fw_concave_min(value, grad, cs_c,
                             _ball_starts(pairs_c, cs, rng, eig_starts=True))
        u, iters = res.u, res.iterations

    u_full = u + offset
    objective = -sum(bhatt_distance(pq, u) for pq in pairs_c)
    return DesignResult(u_seq=u_full, first_input=u_full[:cs.n_u],
                        objective_value=objective, certified_concave="na",
                        iterations=iters)


def design_qta(pairs, b: BeliefState, cs: ConstraintSet, rng=None) -> DesignResult:
    """Minimize the probability-weighted quadratic expansion of the bound."""
    if not pairs:
        return _trivial_result(cs)
    pairs_c, offset = _centered(pairs, cs)
    w = pair_weights(pairs_c, b)
    m = cs.m
    M = np.zeros((m, m))
    q = np.zeros(m)
    const = 0.0
    for wi, pq in zip(w, pairs_c):
        P, qi, r0 = taylor_form(pq)
        M += wi * P
        q += wi * qi
        const += wi * r0

    def value(u):
        return float(0.5 * u @ M @ u + q @ u + const)

    candidates = []
    eigmin = np.linalg.eigvalsh(0.5 * (M + M.T)).min() if m else 0.0
    if eigmin >= -1e-10 * max(1.0, np.abs(M).max()):
        u_stat = np.linalg.lstsq(M, -q, rcond=None)[0]
        cs_c = replace(cs, center=tuple(0.0 for _ in range(cs.n_u))) \
            if isinstance(cs, EnergyBallProduct) else cs
        if contains(cs_c, u_stat):
            candidates.append((value(u_stat), u_stat, 0))

    if isinstance(cs, BoxRatePolytope):
        vertices = enumerate_vertices(cs)
        vals = kernels.quad_batch_eval((0.5 * M)[None], q[None], np.array([const]), vertices)[0]
        idx = int(np.argmin(vals))
        candidates.append((value(vertices[idx]), vertices[idx], 0))
    else:
        def grad(u):
            return M @ u + q

        cs_c = replace(cs, center=tuple(0.0 for _ in range(cs.n_u)))
        res = fw_concave_min(value, grad, cs_c,
                             _ball_starts(pairs_c, cs, rng, eig_starts=True))
        candidates.append((res.value, res.u, res.iterations))

    val, u, iters = min(candidates, key=lambda t: t[0])
    u_full = u + offset
    return DesignResult(u_seq=u_full, first_input=u_full[:cs.n_u],
                        objective_value=float(val), certified_concave="na",
                        iterations=iters)


def design_bc(pairs, b: BeliefState, cs: ConstraintSet, rng=None) -> DesignResult:
    """Minimize the weighted coefficient bound at the full horizon."""
    if not pairs:
        return _trivial_result(cs, cert="yes")
    pairs_c, offset = _centered(pairs, cs)
    w = pair_weights(pairs_c, b)
    H, c, h = stack_pairs(pairs_c)

    if isinstance(cs, BoxRatePolytope):
        vertices = enumerate_vertices(cs)
        vals = kernels.weighted_exp_objective(H, c, h, w, vertices)
        u = vertices[int(np.argmin(vals))]
        iters = 0
        cert = _certificate(pairs_c, cs, vertices)
    else:
        cs_c = replace(cs, center=tuple(0.0 for _ in range(cs.n_u)))

        def value(u):
            return float(kernels.weighted_exp_objective(H, c, h, w, u[None, :])[0])

        def grad(u):
            return kernels.weighted_exp_grad(H, c, h, w, u)

        res = fw_concave_min(value, grad, cs_c, _ball_starts(pairs_c, cs, rng))
        u, iters = res.u, res.iterations
        cert = _certificate(pairs_c, cs)

    u_full = u + offset
    objective = weighted_bound(pairs_c, b, u_full - offset)
    return DesignResult(u_seq=u_full, first_input=u_full[:cs.n_u],
                        objective_value=objective, certified_concave=cert,
                        iterations=iters)


def design_sbc(prefix_pairs: dict, b: BeliefState, cs: ConstraintSet, rng=None) -> DesignResult:
    """Minimize the bound summed over nested input prefixes of length 1..N."""
    if not any(prefix_pairs.values()):
        return _trivial_result(cs, cert="yes")
    n_u = cs.n_u
    stacks = {}
    certs_ok = True
    vertices = enumerate_vertices(cs) if isinstance(cs, BoxRatePolytope) else None
    prefix_views = {}
    for L, pairs_L in prefix_pairs.items():
        if isinstance(cs, EnergyBallProduct) and np.any(np.asarray(cs.center) != 0.0):
            center_L = np.tile(np.asarray(cs.center), L)
            pairs_L = [shift_quadratic(pq, center_L) for pq in pairs_L]
        stacks[L] = (stack_pairs(pairs_L), pair_weights(pairs_L, b), pairs_L)
        if vertices is not None:
            prefix_views[L] = _prefix_view(cs, L)
        for pq in pairs_L:
            spec = concavity.spectrum(pq)
            if isinstance(cs, BoxRatePolytope):
                res = concavity.check_polytope(pq, spec, prefix_views[L])
            else:
                res = concavity.check_energy_ball(pq, spec, cs.energy_bound, L)
            if res is not True:
                certs_ok = False
    cert = "yes" if certs_ok else "no"

    if isinstance(cs, BoxRatePolytope):
        vals = np.zeros(vertices.shape[0])
        for L, ((H, c, h), w, _) in stacks.items():
            vals += kernels.weighted_exp_objective(H, c, h, w, prefix_views[L])
        u = vertices[int(np.argmin(vals))]
        iters = 0
        offset = np.zeros(cs.m)
    else:
        offset = cs.stacked_center
        cs_c = replace(cs, center=tuple(0.0 for _ in range(n_u)))

        def value(u):
            total = 0.0
            for L, ((H, c, h), w, _) in stacks.items():
                pref = np.ascontiguousarray(u[None, :L * n_u])
                total += float(kernels.weighted_exp_objective(H, c, h, w, pref)[0])
            return total

        def grad(u):
            g = np.zeros_like(u)
            for L, ((H, c, h), w, _) in stacks.items():
                pref = np.ascontiguousarray(u[:L * n_u])
                g[:L * n_u] += kernels.weighted_exp_grad(H, c, h, w, pref)
            return g

        full_pairs = stacks[max(stacks)][2]
        res = fw_concave_min(value, grad, cs_c, _ball_starts(full_pairs, cs, rng))
        u, iters = res.u, res.iterations

    objective = sum(weighted_bound(pairs_L, b, u[:L * n_u])
                    for L, (_, _, pairs_L) in stacks.items())
    u_full = u + offset
    return DesignResult(u_seq=u_full, first_input=u_full[:n_u],
                        objective_value=float(objective), certified_concave=cert,
                        iterations=iters)


def design_ol(models, noises, cs: ConstraintSet, init_filters, priors,
              horizon: int = 200, n_starts: int = 20, rng=None) -> np.ndarray:
    """Design one long input sequence offline from the initial belief.

    Minimizes the log of the weighted coefficient bound at the given horizon
    (same minimizers, no exponential underflow at long horizons) by projected
    gradient descent with backtracking from ``n_starts`` feasible starts.
    Returns the stacked sequence; the harness replays it step by step and
    re-clips at the wrap-around.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    cs_ol = replace(cs, horizon=horizon)
    lifts = [build_lifted(mdl, nz, horizon) for mdl, nz in zip(models, noises)]
    pairs = all_pairs(lifts, init_filters)
    pairs_c, offset = _centered(pairs, cs_ol)
    if isinstance(cs_ol, EnergyBallProduct):
        cs_work = replace(cs_ol, center=tuple(0.0 for _ in range(cs.n_u)))
    else:
        cs_work = cs_ol
    if not pairs_c:
        return feasible_clip(cs_ol, offset)

    b = BeliefState(np.log(np.asarray(priors, dtype=float)), tuple(init_filters))
    w = pair_weights(pairs_c, b)
    H, c, h = stack_pairs(pairs_c)
    logw = np.log(np.maximum(w, 1e-300))

    def value_and_grad(u):
        d = kernels.quad_batch_eval(H, c, h, u[None, :])[:, 0]
        a = logw - d
        val = float(logsumexp(a))
        soft = np.exp(a - val)
        grads = 2.0 * np.einsum("pij,j->pi", H, u) + c
        return val, -(soft @ grads)

    best_u, best_val = None, np.inf
    for s in range(max(1, n_starts)):
        if s == 0:
            u = np.zeros(cs_work.m)
        else:
            u = feasible_clip(cs_work, rng.uniform(-1.0, 1.0, cs_work.m) * _start_scale(cs_work))
        val, g = value_and_grad(u)
        step = 1.0
        for _ in range(500):
            improved = False
            trial_step = step
            for _ in range(40):
                cand = feasible_clip(cs_work, u - trial_step * g)
                cval, cg = value_and_grad(cand)
                if cval < val - 1e-12:
                    u, val, g = cand, cval, cg
                    step = min(trial_step * 1.5, 1e6)
                    improved = True
                    break
                trial_step *= 0.5
            if not improved:
                break
        if val < best_val:
            best_u, best_val = u, val
    return best_u + offset


def _start_scale(cs: ConstraintSet) -> float:
    if isinstance(cs, EnergyBallProduct):
        return float(np.sqrt(cs.energy_bound))
    return cs.amp_bound
