"""Stepsize rules and the closed-form iteration counts that go with them.

Every rule is a frozen dataclass with a pure stepsize(ctx) method: same
context in, same stepsize out.  Rules whose stepsize depends on a probe
evaluation f(z + t s) set needs_probe and expose t; the optimizer supplies
the probe value through the context.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .directions import DistributionConstants, L1, L2, WEIGHTED_L1

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class StepContext:
    """Per-iteration facts a stepsize rule may consume."""

    k: int
    f_z: float
    probe_value: float | None = None
    direction_index: int | None = None
    direction: np.ndarray | None = None


def _check_beta(beta: float) -> None:
    if not (0.0 <= beta < 1.0):
        raise ValueError("beta must lie in [0,1)")


def _theta_k_value(theta_k, k: int) -> float:
    t = theta_k(k) if callable(theta_k) else float(theta_k)
    if not (0.0 < t < 2.0):
        raise ValueError(f"theta_k must lie in (0,2), got {t!r} at k={k}")
    return t


def _require_probe(ctx: StepContext) -> float:
    if ctx.probe_value is None:
        raise ValueError("solution-free rule needs a probe value in the context")
    return ctx.probe_value


def _require_index(ctx: StepContext) -> int:
    if ctx.direction_index is None:
        raise ValueError("importance-sampling rule needs direction_index in the context")
    return ctx.direction_index


def _require_unit(ctx: StepContext) -> None:
    if ctx.direction is None:
        raise ValueError("solution-free rule needs the direction in the context")
    n = float(np.dot(ctx.direction, ctx.direction))
    if abs(n - 1.0) > _UNIT_TOL:
        raise ValueError(f"solution-free rule requires ||s||_2 = 1, got ||s||^2 = {n!r}")


@dataclass(frozen=True)
class Constant:
    """gamma^k = gamma."""

    gamma: float
    needs_probe = False

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")

    def stepsize(self, ctx: StepContext) -> float:
        return self.gamma


@dataclass(frozen=True)
class FixedHorizon:
    """gamma^k = gamma0 / sqrt(horizon), constant over a run of known length."""

    gamma0: float
    horizon: int
    needs_probe = False

    def __post_init__(self):
        if self.gamma0 <= 0.0:
            raise ValueError("gamma0 must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def stepsize(self, ctx: StepContext) -> float:
        return self.gamma0 / math.sqrt(self.horizon)


@dataclass(frozen=True)
class Decreasing:
    """gamma^k = 2 / (alpha k + theta) with theta >= 2/alpha."""

    alpha: float
    theta: float
    needs_probe = False

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        if self.theta < 2.0 / self.alpha:
            raise ValueError("theta must be >= 2/alpha")

    def stepsize(self, ctx: StepContext) -> float:
        return 2.0 / (self.alpha * ctx.k + self.theta)


@dataclass(frozen=True)
class SolutionDependent:
    """gamma^k = (1-beta) theta_k mu_d sqrt(2 mu (f_z - f_star)) / L."""

    mu: float
    L: float
    mu_d: float
    f_star: float
    beta: float
    theta_k: float | Callable[[int], float] = 1.0
    needs_probe = False

    def __post_init__(self):
        if self.mu <= 0.0 or self.L <= 0.0 or self.mu_d <= 0.0:
            raise ValueError("mu, L, mu_d must be > 0")
        _check_beta(self.beta)
        if not callable(self.theta_k):
            _theta_k_value(self.theta_k, 0)

    def stepsize(self, ctx: StepContext) -> float:
        gap = ctx.f_z - self.f_star
        if gap < 0.0:
            raise ValueError(f"f_z = {ctx.f_z!r} is below the declared f_star = {self.f_star!r}")
        th = _theta_k_value(self.theta_k, ctx.k)
        return (1.0 - self.beta) * th * self.mu_d * math.sqrt(2.0 * self.mu * gap) / self.L


@dataclass(frozen=True)
class SolutionFree:
    """gamma^k = (1-beta) |f(z + t s) - f(z)| / (L t); requires ||s||_2 = 1."""

    L: float
    t: float
    beta: float
    needs_probe = True

    def __post_init__(self):
        if self.L <= 0.0:
            raise ValueError("L must be > 0")
        if self.t <= 0.0:
            raise ValueError("t must be > 0")
        _check_beta(self.beta)

    def stepsize(self, ctx: StepContext) -> float:
        probe = _require_probe(ctx)
        _require_unit(ctx)
        return (1.0 - self.beta) * abs(probe - ctx.f_z) / (self.L * self.t)


def _check_pw(p, w, coord_L=None):
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if p.shape != w.shape or p.ndim != 1:
        raise ValueError("p and w must be vectors of equal length")
    if np.any(p <= 0.0) or np.any(w <= 0.0):
        raise ValueError("p and w must be strictly positive")
    if abs(float(np.sum(p)) - 1.0) > 1e-12:
        raise ValueError("p must sum to 1")
    if coord_L is not None:
        coord_L = np.asarray(coord_L, dtype=float)
        if coord_L.shape != p.shape:
            raise ValueError("coord_L must match p in length")
        if np.any(coord_L <= 0.0):
            raise ValueError("coord_L must be strictly positive")
    return p, w, coord_L


def is_sum_weighted_L(p, w, coord_L) -> float:
    """S_w = sum_i L_i p_i / w_i^2, the IS analogue of L gamma_d."""
    p, w, coord_L = _check_pw(p, w, coord_L)
    return float(np.sum(coord_L * p / (w * w)))


def is_min_ratio(p, w) -> float:
    """m = min_i p_i / w_i, the IS analogue of mu_d."""
    p, w, _ = _check_pw(p, w)
    return float(np.min(p / w))


@dataclass(frozen=True)
class ISConstant:
    """gamma_i^k = gamma / w_i."""

    gamma: float
    w: np.ndarray
    needs_probe = False

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")
        w = np.asarray(self.w, dtype=float)
        if np.any(w <= 0.0):
            raise ValueError("w must be strictly positive")
        object.__setattr__(self, "w", w)

    def stepsize(self, ctx: StepContext) -> float:
        return self.gamma / self.w[_require_index(ctx)]


@dataclass(frozen=True)
class ISDecreasing:
    """gamma_i^k = (2 / (alpha k + theta)) / w_i."""

    alpha: float
    theta: float
    w: np.ndarray
    needs_probe = False

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        if self.theta < 2.0 / self.alpha:
            raise ValueError("theta must be >= 2/alpha")
        w = np.asarray(self.w, dtype=float)
        if np.any(w <= 0.0):
            raise ValueError("w must be strictly positive")
        object.__setattr__(self, "w", w)

    def stepsize(self, ctx: StepContext) -> float:
        return 2.0 / (self.alpha * ctx.k + self.theta) / self.w[_require_index(ctx)]


@dataclass(frozen=True)
class ISSolutionDependent:
    """gamma_i^k = (1-beta) theta_k (m / (w_i S_w)) sqrt(2 mu (f_z - f_star))."""

    mu: float
    p: np.ndarray
    w: np.ndarray
    coord_L: np.ndarray
    f_star: float
    beta: float
    theta_k: float | Callable[[int], float] = 1.0
    needs_probe = False

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("mu must be > 0")
        _check_beta(self.beta)
        p, w, coord_L = _check_pw(self.p, self.w, self.coord_L)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "coord_L", coord_L)
        object.__setattr__(self, "_m", float(np.min(p / w)))
        object.__setattr__(self, "_s_w", float(np.sum(coord_L * p / (w * w))))
        if not callable(self.theta_k):
            _theta_k_value(self.theta_k, 0)

    def stepsize(self, ctx: StepContext) -> float:
        i = _require_index(ctx)
        gap = ctx.f_z - self.f_star
        if gap < 0.0:
            raise ValueError(f"f_z = {ctx.f_z!r} is below the declared f_star = {self.f_star!r}")
        th = _theta_k_value(self.theta_k, ctx.k)
        return (1.0 - self.beta) * th * self._m / (self.w[i] * self._s_w) * math.sqrt(2.0 * self.mu * gap)


@dataclass(frozen=True)
class ISSolutionFree:
    """gamma_i^k = (1-beta) |f(z + t e_i) - f(z)| / (L_i t)."""

    coord_L: np.ndarray
    t: float
    beta: float
    needs_probe = True

    def __post_init__(self):
        if self.t <= 0.0:
            raise ValueError("t must be > 0")
        coord_L = np.asarray(self.coord_L, dtype=float)
        if np.any(coord_L <= 0.0):
            raise ValueError("coord_L must be strictly positive")
        object.__setattr__(self, "coord_L", coord_L)
        _check_beta(self.beta)

    def stepsize(self, ctx: StepContext) -> float:
        probe = _require_probe(ctx)
        i = _require_index(ctx)
        return (1.0 - self.beta) * abs(probe - ctx.f_z) / (self.coord_L[i] * self.t)


SCHEDULE_KINDS = (
    "constant",
    "fixed_horizon",
    "decreasing",
    "solution_dependent",
    "solution_free",
)


def stepsize(schedule, ctx: StepContext) -> float:
    """Evaluate a rule: nonnegative, no state, no side effects."""
    gamma = schedule.stepsize(ctx)
    if gamma < 0.0 or not math.isfinite(gamma):
        raise ValueError(f"schedule produced an invalid stepsize {gamma!r}")
    return gamma


def optimal_gamma0(beta: float, f0_gap: float, L: float, gamma_d: float) -> float:
    """sqrt(2 (1-beta)^2 f0_gap / (L gamma_d)), the horizon-tuned base step.

    For importance sampling pass L = S_w and gamma_d = 1.
    """
    _check_beta(beta)
    if L <= 0.0 or gamma_d <= 0.0:
        raise ValueError("L and gamma_d must be > 0")
    if f0_gap < 0.0:
        raise ValueError("f0_gap must be >= 0")
    return math.sqrt(2.0 * (1.0 - beta) ** 2 * f0_gap / (L * gamma_d))


def solution_free_t_max(epsilon: float, mu_d: float, mu: float, L: float) -> float:
    """Largest probe offset t with noise floor <= epsilon: sqrt(4 eps mu_d^2 mu / L^2)."""
    if epsilon <= 0.0 or mu_d <= 0.0 or mu <= 0.0 or L <= 0.0:
        raise ValueError("epsilon, mu_d, mu, L must be > 0")
    if mu_d * mu_d > L / mu:
        warnings.warn(
            f"mu_d^2 = {mu_d * mu_d:.6g} exceeds L/mu = {L / mu:.6g}; "
            "the solution-free rate guarantee does not apply",
            stacklevel=2,
        )
    return math.sqrt(4.0 * epsilon * mu_d * mu_d * mu) / L


def solution_free_t_max_is(epsilon: float, mu: float, p, coord_L) -> float:
    """IS probe offset bound: sqrt(4 eps mu min_i(p_i/L_i) / sum_i p_i L_i)."""
    if epsilon <= 0.0 or mu <= 0.0:
        raise ValueError("epsilon and mu must be > 0")
    p, coord_L, _ = _check_pw(p, coord_L)
    ratio = float(np.min(p / coord_L))
    total = float(np.sum(p * coord_L))
    return math.sqrt(4.0 * epsilon * mu * ratio / total)


def quadratic_level_radius(coord_L, f0_gap: float, c: DistributionConstants) -> float:
    """R0 = max dual-norm distance to x_star over the f(x0) level set of the
    separable quadratic 1/2 sum L_i (x_i - shift_i)^2."""
    coord_L = np.asarray(coord_L, dtype=float)
    if np.any(coord_L <= 0.0):
        raise ValueError("coord_L must be strictly positive")
    if f0_gap < 0.0:
        raise ValueError("f0_gap must be >= 0")
    if c.norm_tag in (L2, L1):
        return math.sqrt(2.0 * f0_gap / float(np.min(coord_L)))
    if c.norm_tag == WEIGHTED_L1:
        if c.basis is not None and not np.allclose(c.basis, np.eye(coord_L.size)):
            raise ValueError("level radius for a rotated basis is not supported")
        return float(np.max(np.sqrt(2.0 * f0_gap / coord_L) / c.weights))
    raise ValueError(f"unknown norm tag {c.norm_tag!r}")


THEOREM_IDS = (
    "NC",
    "CVX-CONST",
    "CVX-DEC",
    "SC-DEP",
    "SC-FREE",
    "IS-NC",
    "IS-CVX-CONST",
    "IS-CVX-DEC",
    "IS-SC-DEP",
    "IS-SC-FREE",
)


def _need(params: dict, theorem_id: str, *keys):
    out = []
    for key in keys:
        if key not in params:
            raise ValueError(f"required_iterations({theorem_id!r}) missing parameter {key!r}")
        out.append(params[key])
    return out


def _kappa(params: dict, theorem_id: str) -> float:
    if "kappa" in params:
        return float(params["kappa"])
    L, mu = _need(params, theorem_id, "L", "mu")
    return float(L) / float(mu)


def _pos_log(x: float) -> float:
    return max(0.0, math.log(x))


def _count(value: float) -> int:
    return max(0, math.ceil(value))


def required_iterations(theorem_id: str, params: dict) -> int:
    """Iterations sufficient for accuracy epsilon under the named guarantee.

    Returns ceil of the closed-form count, clamped at 0 when the target is
    already met.  Raises on unknown ids, missing parameters, or epsilon
    outside the admissible range of the constant-stepsize rules.
    """
    if theorem_id not in THEOREM_IDS:
        raise ValueError(f"unknown theorem id {theorem_id!r}")
    eps = float(_need(params, theorem_id, "epsilon")[0])
    if eps <= 0.0:
        raise ValueError("epsilon must be > 0")
    gap = float(_need(params, theorem_id, "gap")[0])
    if gap < 0.0:
        raise ValueError("gap must be >= 0")

    if theorem_id == "NC":
        L, gamma_d, mu_d = _need(params, theorem_id, "L", "gamma_d", "mu_d")
        return _count(2.0 * gap * L * gamma_d / (mu_d**2 * eps**2))

    if theorem_id == "CVX-CONST":
        L, gamma_d, mu_d, r0 = _need(params, theorem_id, "L", "gamma_d", "mu_d", "r0")
        cap = L * gamma_d * r0**2 / mu_d**2
        if eps > cap:
            raise ValueError(f"epsilon = {eps!r} above admissible bound {cap!r}")
        return _count(cap / eps * _pos_log(2.0 * gap / eps))

    if theorem_id == "CVX-DEC":
        L, gamma_d, mu_d, r0, beta = _need(params, theorem_id, "L", "gamma_d", "mu_d", "r0", "beta")
        lead = 2.0 * r0**2 / mu_d**2
        return _count(lead / eps * max((1.0 - beta) ** 2 * gap, L * gamma_d) - lead * (1.0 - beta) ** 2)

    if theorem_id == "SC-DEP":
        mu_d, theta = _need(params, theorem_id, "mu_d", "theta")
        return _count(_kappa(params, theorem_id) / (theta * mu_d**2) * _pos_log(gap / eps))

    if theorem_id == "SC-FREE":
        (mu_d,) = _need(params, theorem_id, "mu_d")
        return _count(_kappa(params, theorem_id) / mu_d**2 * _pos_log(2.0 * gap / eps))

    if theorem_id == "IS-NC":
        p, w, coord_L = _need(params, theorem_id, "p", "w", "coord_L")
        s_w = is_sum_weighted_L(p, w, coord_L)
        m = is_min_ratio(p, w)
        return _count(2.0 * gap * s_w / (m**2 * eps**2))

    if theorem_id == "IS-CVX-CONST":
        p, w, coord_L, r0 = _need(params, theorem_id, "p", "w", "coord_L", "r0")
        s_w = is_sum_weighted_L(p, w, coord_L)
        m = is_min_ratio(p, w)
        cap = r0**2 * s_w / m**2
        if eps > cap:
            raise ValueError(f"epsilon = {eps!r} above admissible bound {cap!r}")
        return _count(cap / eps * _pos_log(2.0 * gap / eps))

    if theorem_id == "IS-CVX-DEC":
        p, w, coord_L, r0, beta = _need(params, theorem_id, "p", "w", "coord_L", "r0", "beta")
        s_w = is_sum_weighted_L(p, w, coord_L)
        m = is_min_ratio(p, w)
        lead = 2.0 * r0**2 / m**2
        return _count(lead / eps * max((1.0 - beta) ** 2 * gap, s_w) - lead * (1.0 - beta) ** 2)

    if theorem_id == "IS-SC-DEP":
        p, w, coord_L, mu, theta = _need(params, theorem_id, "p", "w", "coord_L", "mu", "theta")
        s_w = is_sum_weighted_L(p, w, coord_L)
        m = is_min_ratio(p, w)
        return _count(s_w / (theta * float(mu) * m**2) * _pos_log(gap / eps))

    if theorem_id == "IS-SC-FREE":
        p, coord_L, mu = _need(params, theorem_id, "p", "coord_L", "mu")
        p, coord_L, _ = _check_pw(p, coord_L)
        ratio = float(np.min(p / coord_L))
        return _count(1.0 / (float(mu) * ratio) * _pos_log(2.0 * gap / eps))

    raise AssertionError("unreachable")
