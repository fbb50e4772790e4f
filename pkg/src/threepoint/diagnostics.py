"""Rate envelopes, empirical rate fits, and per-step inequality checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optimizers import RunTrace
from .schedules import is_min_ratio, is_sum_weighted_L

SLACK_TOL = -1e-10


@dataclass(frozen=True)
class BoundEnvelope:
    """values[k] bounds the tracked quantity after k iterations.

    Gap-type guarantees bound E[f(z^k) - f_star]; the NC variants bound the
    running average of the distribution-norm gradient, and their k = 0 entry
    repeats k = 1 (the rate diverges at zero iterations).
    """

    theorem_id: str
    values: np.ndarray
    params: dict


def _envelope_values(theorem_id: str, params: dict, n_iters: int) -> np.ndarray:
    ks = np.arange(n_iters + 1, dtype=float)
    get = params.__getitem__

    if theorem_id in ("NC", "IS-NC"):
        gap = get("gap")
        if theorem_id == "NC":
            scale = math.sqrt(2.0 * gap * get("L") * get("gamma_d")) / get("mu_d")
        else:
            s_w = is_sum_weighted_L(get("p"), get("w"), get("coord_L"))
            scale = math.sqrt(2.0 * gap * s_w) / is_min_ratio(get("p"), get("w"))
        vals = scale / np.sqrt(np.maximum(ks, 1.0))
        return vals

    gap = get("gap")
    if theorem_id == "CVX-CONST":
        beta, r0, mu_d, L, gamma_d, gamma = (
            get("beta"), get("r0"), get("mu_d"), get("L"), get("gamma_d"), get("gamma"))
        rate = 1.0 - gamma * mu_d / ((1.0 - beta) * r0)
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"stepsize gamma = {gamma!r} outside the contractive range")
        floor = L * gamma * gamma_d * r0 / (2.0 * (1.0 - beta) * mu_d)
        return rate**ks * gap + floor

    if theorem_id == "IS-CVX-CONST":
        beta, r0, gamma = get("beta"), get("r0"), get("gamma")
        m = is_min_ratio(get("p"), get("w"))
        s_w = is_sum_weighted_L(get("p"), get("w"), get("coord_L"))
        rate = 1.0 - gamma * m / ((1.0 - beta) * r0)
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"stepsize gamma = {gamma!r} outside the contractive range")
        floor = gamma * r0 * s_w / (2.0 * (1.0 - beta) * m)
        return rate**ks * gap + floor

    if theorem_id == "CVX-DEC":
        beta, alpha, theta = get("beta"), get("alpha"), get("theta")
        cap = max(gap, 2.0 * get("L") * get("gamma_d") / (alpha * theta * (1.0 - beta) ** 2))
        eta = alpha / theta
        return cap / (eta * ks + 1.0)

    if theorem_id == "IS-CVX-DEC":
        beta, alpha, theta = get("beta"), get("alpha"), get("theta")
        s_w = is_sum_weighted_L(get("p"), get("w"), get("coord_L"))
        cap = max(gap, 2.0 * s_w / (alpha * theta * (1.0 - beta) ** 2))
        eta = alpha / theta
        return cap / (eta * ks + 1.0)

    if theorem_id == "SC-DEP":
        mu_d, mu, L = get("mu_d"), get("mu"), get("L")
        theta = params.get("theta")
        if theta is None:
            theta_k = get("theta_k")
            theta = 2.0 * theta_k - get("gamma_d") * theta_k**2
        rate = 1.0 - theta * mu_d**2 * mu / L
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"contraction factor {rate!r} outside [0,1)")
        return rate**ks * gap

    if theorem_id == "SC-FREE":
        mu_d, mu, L, t = get("mu_d"), get("mu"), get("L"), get("t")
        rate = 1.0 - mu_d**2 * mu / L
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"contraction factor {rate!r} outside [0,1)")
        floor = L**2 * t**2 / (8.0 * mu_d**2 * mu)
        return rate**ks * gap + floor

    if theorem_id == "IS-SC-DEP":
        mu = get("mu")
        m = is_min_ratio(get("p"), get("w"))
        s_w = is_sum_weighted_L(get("p"), get("w"), get("coord_L"))
        theta = params.get("theta")
        if theta is None:
            theta_k = get("theta_k")
            theta = 2.0 * theta_k - theta_k**2
        rate = 1.0 - theta * mu * m**2 / s_w
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"contraction factor {rate!r} outside [0,1)")
        return rate**ks * gap

    if theorem_id == "IS-SC-FREE":
        mu, t = get("mu"), get("t")
        p = np.asarray(get("p"), dtype=float)
        coord_L = np.asarray(get("coord_L"), dtype=float)
        ratio = float(np.min(p / coord_L))
        rate = 1.0 - mu * ratio
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"contraction factor {rate!r} outside [0,1)")
        floor = t**2 / (8.0 * mu * ratio) * float(np.sum(p * coord_L))
        return rate**ks * gap + floor

    raise ValueError(f"unknown theorem id {theorem_id!r}")


def bound_envelope(theorem_id: str, params: dict, n_iters: int) -> BoundEnvelope:
    """Theoretical envelope values at k = 0 .. n_iters.

    Raises KeyError-style ValueErrors on missing parameters and refuses
    non-contractive parameter combinations.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    try:
        values = _envelope_values(theorem_id, params, n_iters)
    except KeyError as exc:
        raise ValueError(f"bound_envelope({theorem_id!r}) missing parameter {exc}") from None
    if np.any(~np.isfinite(values)) or np.any(values < 0.0):
        raise ValueError("envelope must be finite and nonnegative")
    return BoundEnvelope(theorem_id, values, dict(params))


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(gap) against k.

    kind is "linear" (geometric decay, rate = per-iteration contraction) or
    "sublinear" (log-log fit, rate = power exponent).  hit_zero marks traces
    that reached gap 0 exactly, where the fit is replaced by contraction 0.
    """

    kind: str
    rate: float
    r_squared: float
    n_points: int
    hit_zero: bool = False


def _gap_series(trace: RunTrace, f_star: float) -> np.ndarray:
    gaps = [trace.f0 - f_star]
    gaps.extend(r.f_z_after - f_star for r in trace.records)
    return np.asarray(gaps, dtype=float)


def fit_linear_rate(trace: RunTrace, f_star: float, burn_in: int | None = None) -> RateFit:
    """Fit gap_k ~ C rho^k after a burn-in (default: first 10%).

    Needs at least 10 post-burn-in points.  A zero gap anywhere after the
    burn-in yields contraction 0 with hit_zero set.
    """
    gaps = _gap_series(trace, f_star)
    if burn_in is None:
        burn_in = len(gaps) // 10
    tail = gaps[burn_in:]
    if len(tail) < 10:
        raise ValueError(f"need >= 10 points after burn-in, have {len(tail)}")
    if np.any(tail < 0.0):
        raise ValueError("gap became negative; f_star is not a lower bound")
    if np.any(tail == 0.0):
        return RateFit("linear", 0.0, 1.0, len(tail), hit_zero=True)
    ks = np.arange(burn_in, len(gaps), dtype=float)
    logs = np.log(tail)
    slope, intercept = np.polyfit(ks, logs, 1)
    pred = slope * ks + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - np.mean(logs)) ** 2))
    # ss_tot == 0 means a flat series: rho = 1 describes it exactly and any
    # residual is polyfit round-off, so report a perfect fit.
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit("linear", float(np.exp(slope)), float(r2), len(tail))


@dataclass(frozen=True)
class InequalityReport:
    """Per-step descent-bound violations, split by domain validity.

    violations: steps whose slack fell below the tolerance while all points
    involved stayed inside the objective's documented smoothness box.
    out_of_domain: violating steps that left the box (the local L does not
    apply there, so these are informational, not failures).
    """

    violations: list[tuple[int, float]]
    out_of_domain: list[tuple[int, float]]
    n_checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_trace_inequalities(trace: RunTrace, objective, slack_tol: float = SLACK_TOL) -> InequalityReport:
    """Check the per-step descent bound on a retained trace.

    For each step k: f(z^{k+1}) <= f(z^k) - (gamma/(1-beta)) |<grad f(z^k), s^k>|
    + L gamma^2 ||s^k||^2 / (2 (1-beta)^2), with L_i in place of L for
    importance-sampled coordinate steps.  slack = rhs - f(z^{k+1}); entries
    below slack_tol are reported.
    """
    if trace.z_before is None or trace.s is None:
        raise ValueError("trace was not recorded with retain_internals=True")
    if not objective.has_gradient:
        raise ValueError("objective needs a gradient oracle for inequality checks")
    info = objective.smoothness
    beta = trace.beta
    one_m = 1.0 - beta
    box = info.box_halfwidth
    violations: list[tuple[int, float]] = []
    out_of_domain: list[tuple[int, float]] = []
    f_before = trace.f0
    for rec, z, s in zip(trace.records, trace.z_before, trace.s):
        if rec.direction_index is not None:
            if info.coord_L is None:
                raise ValueError("importance-sampled trace needs coord_L metadata")
            L = float(info.coord_L[rec.direction_index])
        else:
            if info.L is None:
                raise ValueError("objective has no smoothness constant L")
            L = info.L
        g = objective.gradient(z)
        gamma = rec.gamma
        h = gamma / one_m
        inner = abs(float(np.dot(g, s)))
        s_sq = float(np.dot(s, s))
        rhs = f_before - h * inner + L * gamma * gamma * s_sq / (2.0 * one_m * one_m)
        slack = rhs - rec.f_z_after
        if slack < slack_tol:
            if box is not None and (
                float(np.max(np.abs(z))) > box
                or float(np.max(np.abs(z - h * s))) > box
                or float(np.max(np.abs(z + h * s))) > box
            ):
                out_of_domain.append((rec.k, slack))
            else:
                violations.append((rec.k, slack))
        f_before = rec.f_z_after
    return InequalityReport(violations, out_of_domain, len(trace.records))


def finite_diff_gradient_check(
    objective,
    n_points: int = 100,
    h: float = 1e-6,
    rng: np.random.Generator | None = None,
    halfwidth: float = 2.0,
) -> float:
    """Max relative error between central differences and the gradient oracle.

    Points are drawn uniformly from [-halfwidth, halfwidth]^d (clipped to the
    objective's own box when it declares one).  Does not perturb the
    evaluation counter semantics; FD evaluations are counted like any query.
    """
    if not objective.has_gradient:
        raise ValueError("objective has no gradient oracle to check")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if h <= 0.0:
        raise ValueError("h must be > 0")
    if rng is None:
        rng = np.random.default_rng(0)
    box = objective.smoothness.box_halfwidth
    if box is not None:
        halfwidth = min(halfwidth, box)
    d = objective.dimension
    worst = 0.0
    for _ in range(n_points):
        x = rng.uniform(-halfwidth, halfwidth, size=d)
        g = objective.gradient(x)
        fd = np.empty(d)
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            fd[i] = (objective.value(x + e) - objective.value(x - e)) / (2.0 * h)
        denom = max(float(np.linalg.norm(g)), 1e-12)
        worst = max(worst, float(np.linalg.norm(fd - g)) / denom)
    return worst
