"""Momentum three-point descent (smtp), its importance-sampling variant
(smtp_is), and the momentum-free baseline (stp).

All three share the same acceptance rule: evaluate the two candidates
z -/+ (gamma/(1-beta)) s and keep the best of {current, plus, minus}, with
ties resolved stay > plus > minus.  A "stay" freezes the point, the momentum
buffer, and the cached objective value.  Every iteration costs exactly two
evaluations plus one probe when the stepsize rule requires it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .directions import DirectionDistribution, DistributionConstants, categorical_index, constants, d_norm, sample
from .schedules import StepContext, stepsize

PLUS = "plus"
MINUS = "minus"
STAY = "stay"


class NonFiniteObjectiveError(RuntimeError):
    """The objective returned NaN or inf; the run cannot continue."""

    def __init__(self, k: int, value: float):
        super().__init__(f"non-finite objective value {value!r} at iteration {k}")
        self.k = k
        self.value = value


@dataclass
class OptimizerState:
    """x: anchor iterate, v: momentum buffer, z: evaluated iterate."""

    x: np.ndarray
    v: np.ndarray
    z: np.ndarray
    f_z: float
    k: int
    beta: float
    last_gamma: float = 0.0


@dataclass
class IterationRecord:
    k: int
    f_z_after: float
    gamma: float
    branch: str
    evals_cumulative: int
    grad_norm_D: float | None = None
    direction_index: int | None = None


@dataclass
class RunTrace:
    records: list[IterationRecord]
    final_state: OptimizerState
    config_fingerprint: str
    seed: int | None
    f0: float
    stop_reason: str
    z_before: list[np.ndarray] | None = None
    s: list[np.ndarray] | None = None

    @property
    def beta(self) -> float:
        return self.final_state.beta


def _check_beta(beta: float) -> None:
    if not (0.0 <= beta < 1.0):
        raise ValueError("beta must lie in [0,1)")


def init_state(objective, x0, beta: float) -> OptimizerState:
    _check_beta(beta)
    x0 = np.array(x0, dtype=float)
    if x0.shape != (objective.dimension,):
        raise ValueError(f"x0 must have shape ({objective.dimension},), got {x0.shape}")
    f0 = objective.value(x0)
    if not math.isfinite(f0):
        raise NonFiniteObjectiveError(0, f0)
    return OptimizerState(x=x0, v=np.zeros_like(x0), z=x0, f_z=f0, k=0, beta=beta)


def candidate_points(z, v, s, gamma: float, beta: float):
    """Full candidate construction: momentum buffers, anchored x, and z.

    Builds v_pm = beta v +/- s, x_pm = x_k - gamma v_pm from the anchor
    x_k = z + (gamma beta / (1-beta)) v, and z_pm = x_pm - (gamma beta /
    (1-beta)) v_pm.  Algebraically z_pm = z -/+ (gamma/(1-beta)) s, which is
    the cheap form the step functions use; tests pin both forms together.
    """
    c = gamma * beta / (1.0 - beta)
    x_anchor = z + c * v
    v_p = beta * v + s
    v_m = beta * v - s
    x_p = x_anchor - gamma * v_p
    x_m = x_anchor - gamma * v_m
    z_p = x_p - c * v_p
    z_m = x_m - c * v_m
    return v_p, v_m, x_p, x_m, z_p, z_m


def smtp_step(
    state: OptimizerState,
    objective,
    dist: DirectionDistribution,
    schedule,
    rng: np.random.Generator,
    s: np.ndarray | None = None,
    norm_constants: DistributionConstants | None = None,
    track_grad_norm: bool = False,
) -> tuple[OptimizerState, IterationRecord]:
    """One momentum three-point iteration; mutates and returns state.

    Pass a pre-sampled s to control the direction (the run loop does this
    when retaining internals); otherwise one direction is drawn from rng.
    """
    if s is None:
        s = sample(dist, rng)
    z = state.z
    f_z = state.f_z
    k = state.k
    beta = state.beta

    probe = None
    if schedule.needs_probe:
        probe = objective.value(z + schedule.t * s)
        if not math.isfinite(probe):
            raise NonFiniteObjectiveError(k, probe)
    gamma = stepsize(schedule, StepContext(k, f_z, probe, None, s))

    grad_norm = None
    if track_grad_norm:
        grad_norm = d_norm(norm_constants, objective.gradient(z))

    hs = (gamma / (1.0 - beta)) * s
    z_p = z - hs
    z_m = z + hs
    f_p = objective.value(z_p)
    f_m = objective.value(z_m)
    if not (math.isfinite(f_p) and math.isfinite(f_m)):
        raise NonFiniteObjectiveError(k, f_p if not math.isfinite(f_p) else f_m)

    if f_p < f_z or f_m < f_z:
        if f_p <= f_m:
            branch, z_new, f_new = PLUS, z_p, f_p
            v_new = beta * state.v + s
        else:
            branch, z_new, f_new = MINUS, z_m, f_m
            v_new = beta * state.v - s
        c = gamma * beta / (1.0 - beta)
        state.x = (z + c * state.v) - gamma * v_new
        state.v = v_new
        state.z = z_new
        state.f_z = f_new
        state.last_gamma = gamma
    else:
        branch, f_new = STAY, f_z
    state.k = k + 1
    return state, IterationRecord(k, f_new, gamma, branch, objective.eval_counter, grad_norm)


def stp_step(
    state: OptimizerState,
    objective,
    dist: DirectionDistribution,
    schedule,
    rng: np.random.Generator,
    s: np.ndarray | None = None,
    norm_constants: DistributionConstants | None = None,
    track_grad_norm: bool = False,
) -> tuple[OptimizerState, IterationRecord]:
    """One momentum-free three-point iteration over x -/+ gamma s.

    Branch labels mirror the momentum convention: plus is the x - gamma s
    candidate, so a beta = 0 momentum run and this baseline produce
    identical records from identical seeds.
    """
    if s is None:
        s = sample(dist, rng)
    x = state.z
    f_x = state.f_z
    k = state.k

    probe = None
    if schedule.needs_probe:
        probe = objective.value(x + schedule.t * s)
        if not math.isfinite(probe):
            raise NonFiniteObjectiveError(k, probe)
    gamma = stepsize(schedule, StepContext(k, f_x, probe, None, s))

    grad_norm = None
    if track_grad_norm:
        grad_norm = d_norm(norm_constants, objective.gradient(x))

    gs = gamma * s
    x_p = x - gs
    x_m = x + gs
    f_p = objective.value(x_p)
    f_m = objective.value(x_m)
    if not (math.isfinite(f_p) and math.isfinite(f_m)):
        raise NonFiniteObjectiveError(k, f_p if not math.isfinite(f_p) else f_m)

    if f_p < f_x or f_m < f_x:
        if f_p <= f_m:
            branch, x_new, f_new = PLUS, x_p, f_p
        else:
            branch, x_new, f_new = MINUS, x_m, f_m
        state.x = x_new
        state.z = x_new
        state.f_z = f_new
        state.last_gamma = gamma
    else:
        branch, f_new = STAY, f_x
    state.k = k + 1
    return state, IterationRecord(k, f_new, gamma, branch, objective.eval_counter, grad_norm)


def smtp_is_step(
    state: OptimizerState,
    objective,
    schedule,
    p: np.ndarray,
    rng: np.random.Generator,
    index: int | None = None,
    cdf: np.ndarray | None = None,
    track_grad_norm: bool = False,
) -> tuple[OptimizerState, IterationRecord]:
    """One coordinate-importance-sampled iteration; direction e_{i}, i ~ p."""
    if index is None:
        if cdf is None:
            cdf = np.cumsum(p)
        index = categorical_index(cdf, rng.random())
    z = state.z
    f_z = state.f_z
    k = state.k
    beta = state.beta
    d = z.shape[0]
    s = np.zeros(d)
    s[index] = 1.0

    probe = None
    if schedule.needs_probe:
        zt = z.copy()
        zt[index] += schedule.t
        probe = objective.value(zt)
        if not math.isfinite(probe):
            raise NonFiniteObjectiveError(k, probe)
    gamma = stepsize(schedule, StepContext(k, f_z, probe, index, s))

    grad_norm = None
    if track_grad_norm:
        grad_norm = float(np.sum(np.abs(objective.gradient(z))))

    h = gamma / (1.0 - beta)
    z_p = z.copy()
    z_p[index] -= h
    z_m = z.copy()
    z_m[index] += h
    f_p = objective.value(z_p)
    f_m = objective.value(z_m)
    if not (math.isfinite(f_p) and math.isfinite(f_m)):
        raise NonFiniteObjectiveError(k, f_p if not math.isfinite(f_p) else f_m)

    if f_p < f_z or f_m < f_z:
        if f_p <= f_m:
            branch, z_new, f_new = PLUS, z_p, f_p
            v_new = beta * state.v + s
        else:
            branch, z_new, f_new = MINUS, z_m, f_m
            v_new = beta * state.v - s
        c = gamma * beta / (1.0 - beta)
        state.x = (z + c * state.v) - gamma * v_new
        state.v = v_new
        state.z = z_new
        state.f_z = f_new
        state.last_gamma = gamma
    else:
        branch, f_new = STAY, f_z
    state.k = k + 1
    return state, IterationRecord(k, f_new, gamma, branch, objective.eval_counter, grad_norm, index)


def _run_loop(step_one, objective, x0, beta, max_iters, seed, epsilon_gap, eval_budget,
              retain_internals, config_fingerprint):
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    f_star = objective.smoothness.f_star
    if epsilon_gap is not None and f_star is None:
        raise ValueError("epsilon_gap stopping needs a known f_star")
    start_evals = objective.eval_counter
    state = init_state(objective, x0, beta)
    records: list[IterationRecord] = []
    z_before = [] if retain_internals else None
    s_kept = [] if retain_internals else None
    f0 = state.f_z
    stop_reason = "max_iters"
    for _ in range(max_iters):
        if retain_internals:
            z_before.append(state.z)
        state, rec, s = step_one(state)
        if retain_internals:
            s_kept.append(s)
        records.append(rec)
        if epsilon_gap is not None and state.f_z - f_star <= epsilon_gap:
            stop_reason = "epsilon_gap"
            break
        if eval_budget is not None and objective.eval_counter - start_evals >= eval_budget:
            stop_reason = "eval_budget"
            break
    return RunTrace(records, state, config_fingerprint, seed, f0, stop_reason, z_before, s_kept)


def smtp_run(
    objective,
    dist: DirectionDistribution,
    schedule,
    beta: float,
    x0,
    max_iters: int,
    seed: int | None = None,
    epsilon_gap: float | None = None,
    eval_budget: int | None = None,
    retain_internals: bool = False,
    track_grad_norm: bool = False,
    config_fingerprint: str = "",
) -> RunTrace:
    """Run smtp from x0 for up to max_iters iterations.

    Deterministic given seed.  Stops early when the optimality gap reaches
    epsilon_gap (requires known f_star) or when the evaluations consumed by
    this run reach eval_budget.
    """
    rng = np.random.default_rng(seed)
    nc = constants(dist) if track_grad_norm else None

    def step_one(state):
        s = sample(dist, rng)
        state, rec = smtp_step(state, objective, dist, schedule, rng, s=s,
                               norm_constants=nc, track_grad_norm=track_grad_norm)
        return state, rec, s

    return _run_loop(step_one, objective, x0, beta, max_iters, seed, epsilon_gap,
                     eval_budget, retain_internals, config_fingerprint)


def stp_run(
    objective,
    dist: DirectionDistribution,
    schedule,
    x0,
    max_iters: int,
    seed: int | None = None,
    epsilon_gap: float | None = None,
    eval_budget: int | None = None,
    retain_internals: bool = False,
    track_grad_norm: bool = False,
    config_fingerprint: str = "",
) -> RunTrace:
    """Run the momentum-free baseline; trace-compatible with smtp at beta=0."""
    rng = np.random.default_rng(seed)
    nc = constants(dist) if track_grad_norm else None

    def step_one(state):
        s = sample(dist, rng)
        state, rec = stp_step(state, objective, dist, schedule, rng, s=s,
                              norm_constants=nc, track_grad_norm=track_grad_norm)
        return state, rec, s

    return _run_loop(step_one, objective, x0, 0.0, max_iters, seed, epsilon_gap,
                     eval_budget, retain_internals, config_fingerprint)


def smtp_is_run(
    objective,
    p,
    schedule,
    beta: float,
    x0,
    max_iters: int,
    seed: int | None = None,
    epsilon_gap: float | None = None,
    eval_budget: int | None = None,
    retain_internals: bool = False,
    track_grad_norm: bool = False,
    config_fingerprint: str = "",
) -> RunTrace:
    """Run smtp_is with coordinate probabilities p (importance sampling)."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] != objective.dimension:
        raise ValueError(f"p must have shape ({objective.dimension},)")
    if np.any(p <= 0.0) or abs(float(np.sum(p)) - 1.0) > 1e-12:
        raise ValueError("p must be strictly positive and sum to 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(p)

    def step_one(state):
        i = categorical_index(cdf, rng.random())
        state, rec = smtp_is_step(state, objective, schedule, p, rng, index=i,
                                  track_grad_norm=track_grad_norm)
        if retain_internals:
            s = np.zeros(objective.dimension)
            s[i] = 1.0
        else:
            s = None
        return state, rec, s

    return _run_loop(step_one, objective, x0, beta, max_iters, seed, epsilon_gap,
                     eval_budget, retain_internals, config_fingerprint)


def select_uniform_random_iterate(trace: RunTrace, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Uniform draw over the visited iterates z^0 .. z^{K-1}.

    Needs a trace recorded with retain_internals=True.
    """
    if trace.z_before is None or len(trace.z_before) == 0:
        raise ValueError("trace has no retained iterates; rerun with retain_internals=True")
    idx = int(rng.integers(len(trace.z_before)))
    return idx, trace.z_before[idx].copy()
