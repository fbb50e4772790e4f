"""Config-driven experiment runner.

Configs are flat key=value text with '#' comments.  Every run of a config
with the same seed list reproduces byte-identical trace CSVs: floats are
serialized with 17 significant digits and each seed's generator derives
solely from its own seed value (directions from SeedSequence(seed), noise
from SeedSequence([seed, 1])), so extending the seed list never perturbs
existing runs.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import diagnostics, directions, objectives, optimizers, schedules

ENV_OUT = "THREEPOINT_OUT"
DEFAULT_OUT = "runs"
CSV_HEADER = "k,f_z,gamma,branch,evals,grad_norm_D"

METHODS = ("stp", "smtp", "smtp_is")
COORD_KINDS = ("coord_uniform", "coord_weighted")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    label: str = "run"
    method: str = "smtp"
    beta: float = 0.5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    max_iters: int = 1000
    epsilon: float | None = None
    eval_budget: int | None = None
    track_grad_norm: bool = False
    retain_internals: bool = False
    x0: str = "ones"
    x0_scale: float = 1.0
    objective: str = ""
    dimension: int | None = None
    coord_L: str | None = None
    shift: str | None = None
    horizon: int | None = None
    d_state: int | None = None
    d_ctrl: int | None = None
    noise_sigma: float | None = None
    noise_obs: int = 1
    distribution: str | None = None
    weights: str | None = None
    basis: str = "identity"
    is_p: str = "uniform"
    is_w: str = "coord_L"
    schedule_kind: str = ""
    schedule_gamma: float | None = None
    schedule_gamma0: str | None = None
    schedule_alpha: str | None = None
    schedule_theta: str | None = None
    schedule_t: str | None = None
    schedule_theta_k: float = 1.0
    schedule_horizon: int | None = None
    r0: str | None = None
    theorem: str | None = None
    checkpoints: tuple[int, ...] | None = None
    out: str | None = None
    jobs: int = 1

    def fingerprint(self) -> str:
        parts = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in ("out", "jobs", "label"):
                continue  # execution details, not run identity
            parts.append(f"{f.name}={getattr(self, f.name)!r}")
        digest = hashlib.sha256("\n".join(parts).encode()).hexdigest()
        return digest[:12]


_KEY_TO_FIELD = {
    "label": "label",
    "method": "method",
    "beta": "beta",
    "seeds": "seeds",
    "max_iters": "max_iters",
    "epsilon": "epsilon",
    "eval_budget": "eval_budget",
    "track_grad_norm": "track_grad_norm",
    "retain_internals": "retain_internals",
    "x0": "x0",
    "x0_scale": "x0_scale",
    "objective": "objective",
    "dimension": "dimension",
    "coord_L": "coord_L",
    "shift": "shift",
    "horizon": "horizon",
    "d_state": "d_state",
    "d_ctrl": "d_ctrl",
    "noise.sigma": "noise_sigma",
    "noise.k": "noise_obs",
    "distribution": "distribution",
    "weights": "weights",
    "basis": "basis",
    "is.p": "is_p",
    "is.w": "is_w",
    "schedule.kind": "schedule_kind",
    "schedule.gamma": "schedule_gamma",
    "schedule.gamma0": "schedule_gamma0",
    "schedule.alpha": "schedule_alpha",
    "schedule.theta": "schedule_theta",
    "schedule.t": "schedule_t",
    "schedule.theta_k": "schedule_theta_k",
    "schedule.horizon": "schedule_horizon",
    "r0": "r0",
    "theorem": "theorem",
    "checkpoints": "checkpoints",
    "out": "out",
    "jobs": "jobs",
}

_INT_FIELDS = {"max_iters", "eval_budget", "dimension", "horizon", "d_state", "d_ctrl",
               "noise_obs", "schedule_horizon", "jobs"}
_FLOAT_FIELDS = {"beta", "epsilon", "x0_scale", "noise_sigma", "schedule_gamma",
                 "schedule_theta_k"}
_BOOL_FIELDS = {"track_grad_norm", "retain_internals"}


def _parse_scalar(field_name: str, raw: str, lineno: int):
    try:
        if field_name in _INT_FIELDS:
            return int(raw)
        if field_name in _FLOAT_FIELDS:
            return float(raw)
        if field_name in _BOOL_FIELDS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if field_name == "seeds":
            if "," in raw:
                return tuple(int(p) for p in raw.split(","))
            return tuple(range(int(raw)))
        if field_name == "checkpoints":
            return tuple(int(p) for p in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {field_name}: {exc}") from None


def parse_config(text: str, label: str | None = None) -> ExperimentConfig:
    """Parse a flat key=value config; raises ConfigError with line numbers."""
    cfg = ExperimentConfig()
    seen_lines: dict[str, int] = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {rawline!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        field_name = _KEY_TO_FIELD[key]
        setattr(cfg, field_name, _parse_scalar(field_name, raw, lineno))
        seen_lines[field_name] = lineno
    if label is not None and "label" not in seen_lines:
        cfg.label = label
    _validate(cfg, seen_lines)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_config(text, label=stem)


def _line_of(seen: dict, name: str) -> str:
    return f"line {seen[name]}: " if name in seen else ""


def _validate(cfg: ExperimentConfig, seen: dict[str, int]) -> None:
    if cfg.method not in METHODS:
        raise ConfigError(f"{_line_of(seen, 'method')}unknown method {cfg.method!r}")
    if not (0.0 <= cfg.beta < 1.0):
        raise ConfigError(f"{_line_of(seen, 'beta')}beta must lie in [0,1)")
    if cfg.objective not in ("quadratic", "rosenbrock", "lqr"):
        raise ConfigError(f"{_line_of(seen, 'objective')}unknown objective {cfg.objective!r}")
    if cfg.objective in ("quadratic", "rosenbrock") and cfg.dimension is None:
        raise ConfigError(f"objective {cfg.objective!r} needs dimension")
    if cfg.objective == "lqr":
        for key in ("horizon", "d_state", "d_ctrl"):
            if getattr(cfg, key) is None:
                raise ConfigError(f"objective lqr needs {key}")
    if cfg.schedule_kind not in schedules.SCHEDULE_KINDS:
        raise ConfigError(
            f"{_line_of(seen, 'schedule_kind')}unknown schedule.kind {cfg.schedule_kind!r}")
    if cfg.method == "smtp_is":
        if cfg.distribution is not None and cfg.distribution not in COORD_KINDS:
            raise ConfigError(
                f"{_line_of(seen, 'distribution')}method smtp_is requires a coordinate "
                f"distribution, not {cfg.distribution!r}")
    else:
        if cfg.distribution is None:
            raise ConfigError(f"method {cfg.method!r} needs a distribution")
        if cfg.distribution not in directions.KINDS:
            raise ConfigError(
                f"{_line_of(seen, 'distribution')}unknown distribution {cfg.distribution!r}")
        if cfg.schedule_kind == "solution_free" and cfg.distribution == "gaussian":
            raise ConfigError(
                f"{_line_of(seen, 'schedule_kind')}solution_free needs unit-norm directions; "
                "the gaussian distribution does not provide them")
    if cfg.max_iters < 0:
        raise ConfigError("max_iters must be >= 0")
    if len(cfg.seeds) < 1:
        raise ConfigError("need at least one seed")
    if cfg.noise_sigma is not None and cfg.noise_sigma < 0:
        raise ConfigError("noise.sigma must be >= 0")
    if cfg.theorem is not None and cfg.theorem not in schedules.THEOREM_IDS:
        raise ConfigError(f"{_line_of(seen, 'theorem')}unknown theorem {cfg.theorem!r}")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")


def _parse_vector(spec: str, dimension: int, what: str) -> np.ndarray:
    try:
        vals = np.asarray([float(p) for p in spec.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"bad {what}: {exc}") from None
    if vals.size != dimension:
        raise ConfigError(f"{what} has {vals.size} entries, expected {dimension}")
    return vals


def build_objective(cfg: ExperimentConfig, seed: int) -> objectives.Objective:
    if cfg.objective == "quadratic":
        d = cfg.dimension
        coord_L = (objectives.coord_L_from_spec(cfg.coord_L, d)
                   if cfg.coord_L is not None else np.ones(d))
        shift = None
        if cfg.shift is not None and cfg.shift != "zeros":
            shift = _parse_vector(cfg.shift, d, "shift")
        obj = objectives.make_quadratic(coord_L, shift)
    elif cfg.objective == "rosenbrock":
        obj = objectives.make_rosenbrock(cfg.dimension)
    else:
        obj = objectives.make_lqr(cfg.horizon, cfg.d_state, cfg.d_ctrl)
    if cfg.noise_sigma is not None:
        spec = objectives.NoiseSpec(cfg.noise_sigma, cfg.noise_obs)
        obj = objectives.wrap_noise(obj, spec, np.random.default_rng([seed, 1]))
    return obj


def build_x0(cfg: ExperimentConfig, dimension: int) -> np.ndarray:
    if cfg.x0 == "ones":
        base = np.ones(dimension)
    elif cfg.x0 == "zeros":
        base = np.zeros(dimension)
    else:
        base = _parse_vector(cfg.x0, dimension, "x0")
    return cfg.x0_scale * base


def build_distribution(cfg: ExperimentConfig, dimension: int) -> directions.DirectionDistribution:
    kind = cfg.distribution
    weights = None
    basis = None
    if kind in ("coord_weighted", "orthonormal_weighted"):
        if cfg.weights is None:
            raise ConfigError(f"distribution {kind!r} needs weights")
        weights = _parse_vector(cfg.weights, dimension, "weights")
    if kind == "orthonormal_weighted":
        if cfg.basis == "identity":
            basis = np.eye(dimension)
        elif cfg.basis.startswith("random:"):
            gen = np.random.default_rng(int(cfg.basis.split(":", 1)[1]))
            basis, _ = np.linalg.qr(gen.standard_normal((dimension, dimension)))
        else:
            raise ConfigError(f"bad basis spec {cfg.basis!r}")
    return directions.DirectionDistribution(kind, dimension, weights=weights, basis=basis)


def build_is_vectors(cfg: ExperimentConfig, obj: objectives.Objective):
    coord_L = obj.smoothness.coord_L
    d = obj.dimension
    if cfg.is_p == "uniform":
        p = np.full(d, 1.0 / d)
    elif cfg.is_p == "prop_L":
        if coord_L is None:
            raise ConfigError("is.p = prop_L needs coordinate smoothness metadata")
        p = coord_L / float(np.sum(coord_L))
    else:
        p = _parse_vector(cfg.is_p, d, "is.p")
    if cfg.is_w == "coord_L":
        if coord_L is None:
            raise ConfigError("is.w = coord_L needs coordinate smoothness metadata")
        w = coord_L.copy()
    elif cfg.is_w == "ones":
        w = np.ones(d)
    else:
        w = _parse_vector(cfg.is_w, d, "is.w")
    return p, w


def _resolve_r0(cfg: ExperimentConfig, obj: objectives.Objective, x0, norm_constants) -> float:
    if cfg.r0 is None:
        raise ConfigError("this schedule/theorem needs r0 (set r0 = <float> or r0 = auto)")
    if cfg.r0 != "auto":
        return float(cfg.r0)
    if cfg.objective != "quadratic":
        raise ConfigError("r0 = auto is only available for the quadratic objective")
    gap0 = obj.value(x0) - obj.smoothness.f_star
    return schedules.quadratic_level_radius(obj.smoothness.coord_L, gap0, norm_constants)


def _gap0(obj: objectives.Objective, x0) -> float:
    if obj.smoothness.f_star is None:
        raise ConfigError("this schedule needs a known f_star")
    return obj.value(x0) - obj.smoothness.f_star


def build_schedule(cfg: ExperimentConfig, obj: objectives.Objective, x0,
                   norm_constants=None, p=None, w=None):
    """Construct the stepsize rule a config describes.

    Derived choices ('auto'/'optimal') may evaluate f(x0) once; those
    evaluations happen before the run starts and are counted like any query.
    """
    info = obj.smoothness
    kind = cfg.schedule_kind
    beta = cfg.beta if cfg.method != "stp" else 0.0
    is_mode = cfg.method == "smtp_is"
    horizon = cfg.schedule_horizon if cfg.schedule_horizon is not None else cfg.max_iters

    def need_L() -> float:
        if info.L is None:
            raise ConfigError(f"objective {cfg.objective!r} has no smoothness constant L")
        return info.L

    def need_mu() -> float:
        if info.mu is None:
            raise ConfigError(f"objective {cfg.objective!r} has no strong convexity constant mu")
        return info.mu

    def need_coord_L() -> np.ndarray:
        if info.coord_L is None:
            raise ConfigError(f"objective {cfg.objective!r} has no coordinate smoothness constants")
        return info.coord_L

    if is_mode:
        if kind in ("constant", "fixed_horizon"):
            if kind == "constant":
                if cfg.schedule_gamma is None:
                    raise ConfigError("schedule.kind = constant needs schedule.gamma")
                base = cfg.schedule_gamma
            else:
                if cfg.schedule_gamma0 is None:
                    raise ConfigError("schedule.kind = fixed_horizon needs schedule.gamma0")
                if cfg.schedule_gamma0 == "optimal":
                    s_w = schedules.is_sum_weighted_L(p, w, need_coord_L())
                    g0 = schedules.optimal_gamma0(beta, _gap0(obj, x0), s_w, 1.0)
                else:
                    g0 = float(cfg.schedule_gamma0)
                base = g0 / math.sqrt(horizon)
            return schedules.ISConstant(base, w)
        if kind == "decreasing":
            alpha, theta = _resolve_alpha_theta(
                cfg, obj, x0, mu_like=schedules.is_min_ratio(p, w), norm_constants=norm_constants,
                p=p)
            return schedules.ISDecreasing(alpha, theta, w)
        if kind == "solution_dependent":
            if info.f_star is None:
                raise ConfigError("solution_dependent needs a known f_star")
            return schedules.ISSolutionDependent(
                need_mu(), p, w, need_coord_L(), info.f_star, beta, cfg.schedule_theta_k)
        if kind == "solution_free":
            t = _resolve_t_is(cfg, obj, p)
            return schedules.ISSolutionFree(need_coord_L(), t, beta)
        raise ConfigError(f"unsupported schedule kind {kind!r} for smtp_is")

    if kind == "constant":
        if cfg.schedule_gamma is None:
            raise ConfigError("schedule.kind = constant needs schedule.gamma")
        return schedules.Constant(cfg.schedule_gamma)
    if kind == "fixed_horizon":
        if cfg.schedule_gamma0 is None:
            raise ConfigError("schedule.kind = fixed_horizon needs schedule.gamma0")
        if cfg.schedule_gamma0 == "optimal":
            g0 = schedules.optimal_gamma0(
                beta, _gap0(obj, x0), need_L(), norm_constants.gamma_d)
        else:
            g0 = float(cfg.schedule_gamma0)
        return schedules.FixedHorizon(g0, horizon)
    if kind == "decreasing":
        alpha, theta = _resolve_alpha_theta(
            cfg, obj, x0, mu_like=norm_constants.mu_d, norm_constants=norm_constants)
        return schedules.Decreasing(alpha, theta)
    if kind == "solution_dependent":
        if info.f_star is None:
            raise ConfigError("solution_dependent needs a known f_star")
        return schedules.SolutionDependent(
            need_mu(), need_L(), norm_constants.mu_d, info.f_star, beta, cfg.schedule_theta_k)
    if kind == "solution_free":
        t = _resolve_t(cfg, obj, norm_constants)
        return schedules.SolutionFree(need_L(), t, beta)
    raise ConfigError(f"unsupported schedule kind {kind!r}")


def _resolve_alpha_theta(cfg, obj, x0, mu_like, norm_constants, p=None):
    beta = cfg.beta if cfg.method != "stp" else 0.0
    if cfg.schedule_alpha is None:
        raise ConfigError("schedule.kind = decreasing needs schedule.alpha")
    if cfg.schedule_alpha == "auto":
        if p is not None:
            nc = directions.DistributionConstants(1.0, 1.0, directions.WEIGHTED_L1, weights=p)
        else:
            nc = norm_constants
        r0 = _resolve_r0(cfg, obj, x0, nc)
        alpha = mu_like / ((1.0 - beta) * r0)
    else:
        alpha = float(cfg.schedule_alpha)
    if cfg.schedule_theta is None or cfg.schedule_theta == "auto":
        theta = 2.0 / alpha
    else:
        theta = float(cfg.schedule_theta)
    return alpha, theta


def _resolve_t(cfg, obj, norm_constants) -> float:
    if cfg.schedule_t is None:
        raise ConfigError("schedule.kind = solution_free needs schedule.t")
    if cfg.schedule_t == "auto":
        if cfg.epsilon is None:
            raise ConfigError("schedule.t = auto needs epsilon")
        info = obj.smoothness
        if info.mu is None or info.L is None:
            raise ConfigError("schedule.t = auto needs mu and L metadata")
        return schedules.solution_free_t_max(cfg.epsilon, norm_constants.mu_d, info.mu, info.L)
    return float(cfg.schedule_t)


def _resolve_t_is(cfg, obj, p) -> float:
    if cfg.schedule_t is None:
        raise ConfigError("schedule.kind = solution_free needs schedule.t")
    if cfg.schedule_t == "auto":
        if cfg.epsilon is None:
            raise ConfigError("schedule.t = auto needs epsilon")
        info = obj.smoothness
        if info.mu is None or info.coord_L is None:
            raise ConfigError("schedule.t = auto needs mu and coord_L metadata")
        return schedules.solution_free_t_max_is(cfg.epsilon, info.mu, p, info.coord_L)
    return float(cfg.schedule_t)


def _format(x) -> str:
    if x is None:
        return ""
    return format(x, ".17g")


def _trace_rows(trace: optimizers.RunTrace) -> list[str]:
    rows = [CSV_HEADER]
    for r in trace.records:
        grad = "" if r.grad_norm_D is None else _format(r.grad_norm_D)
        rows.append(f"{r.k},{_format(r.f_z_after)},{_format(r.gamma)},{r.branch},"
                    f"{r.evals_cumulative},{grad}")
    return rows


@dataclass
class SeedResult:
    seed: int
    iterations: int
    evals: int
    stop_reason: str
    final_gap: float | None
    contraction: float | None
    r_squared: float | None
    envelope_ok: bool | None
    wall_time: float


@dataclass
class RunSummary:
    label: str
    fingerprint: str
    seed_results: list[SeedResult]
    envelope_ok: bool | None
    out_dir: str | None


def run_once(cfg: ExperimentConfig, seed: int) -> tuple[optimizers.RunTrace, objectives.Objective]:
    """Build everything a seed needs and run it; returns the trace."""
    obj = build_objective(cfg, seed)
    x0 = build_x0(cfg, obj.dimension)
    fingerprint = cfg.fingerprint()
    common = dict(
        max_iters=cfg.max_iters, seed=seed, epsilon_gap=cfg.epsilon,
        eval_budget=cfg.eval_budget, retain_internals=cfg.retain_internals,
        track_grad_norm=cfg.track_grad_norm, config_fingerprint=fingerprint,
    )
    if cfg.method == "smtp_is":
        p, w = build_is_vectors(cfg, obj)
        schedule = build_schedule(cfg, obj, x0, p=p, w=w)
        trace = optimizers.smtp_is_run(obj, p, schedule, cfg.beta, x0, **common)
    else:
        dist = build_distribution(cfg, obj.dimension)
        nc = directions.constants(dist)
        schedule = build_schedule(cfg, obj, x0, norm_constants=nc)
        if cfg.method == "smtp":
            trace = optimizers.smtp_run(obj, dist, schedule, cfg.beta, x0, **common)
        else:
            trace = optimizers.stp_run(obj, dist, schedule, x0, **common)
    return trace, obj


def _gap_at(trace: optimizers.RunTrace, f_star: float, k: int) -> float:
    # traces that stopped early are padded with their last gap (conservative)
    if k <= 0:
        return trace.f0 - f_star
    idx = min(k, len(trace.records)) - 1
    return trace.records[idx].f_z_after - f_star


def _grad_running_mean(trace: optimizers.RunTrace, k: int) -> float:
    vals = [r.grad_norm_D for r in trace.records[:k]]
    if not vals or any(v is None for v in vals):
        raise ConfigError("NC envelope checks need track_grad_norm = true")
    return float(np.mean(vals))


def _envelope_params(cfg: ExperimentConfig, obj, x0, norm_constants, p, w, schedule) -> dict:
    info = obj.smoothness
    if info.f_star is None:
        raise ConfigError("envelope checks need a known f_star")
    params: dict = {"gap": obj.value(x0) - info.f_star}
    beta = cfg.beta if cfg.method != "stp" else 0.0
    params["beta"] = beta
    if cfg.method == "smtp_is":
        params["p"] = p
        params["w"] = w
        params["coord_L"] = info.coord_L
        params["mu"] = info.mu
        params["t"] = getattr(schedule, "t", None)
        params["theta_k"] = cfg.schedule_theta_k
        if isinstance(schedule, schedules.ISConstant):
            params["gamma"] = schedule.gamma
        if isinstance(schedule, schedules.ISDecreasing):
            params["alpha"] = schedule.alpha
            params["theta"] = schedule.theta
    else:
        params["L"] = info.L
        params["mu"] = info.mu
        params["mu_d"] = norm_constants.mu_d
        params["gamma_d"] = norm_constants.gamma_d
        params["t"] = getattr(schedule, "t", None)
        params["theta_k"] = cfg.schedule_theta_k
        if isinstance(schedule, schedules.Constant):
            params["gamma"] = schedule.gamma
        if isinstance(schedule, schedules.FixedHorizon):
            params["gamma"] = schedule.gamma0 / math.sqrt(schedule.horizon)
        if isinstance(schedule, schedules.Decreasing):
            params["alpha"] = schedule.alpha
            params["theta"] = schedule.theta
    if cfg.theorem in ("CVX-CONST", "CVX-DEC", "IS-CVX-CONST", "IS-CVX-DEC"):
        if cfg.method == "smtp_is":
            nc = directions.DistributionConstants(1.0, 1.0, directions.WEIGHTED_L1, weights=p)
        else:
            nc = norm_constants
        params["r0"] = _resolve_r0(cfg, obj, x0, nc)
    params = {k: v for k, v in params.items() if v is not None}
    return params


def _checkpoints(cfg: ExperimentConfig) -> list[int]:
    if cfg.checkpoints:
        ks = sorted(set(int(k) for k in cfg.checkpoints))
        if any(k < 1 or k > cfg.max_iters for k in ks):
            raise ConfigError("checkpoints must lie in [1, max_iters]")
        return ks
    quarters = {max(1, cfg.max_iters // 4), max(1, cfg.max_iters // 2), max(1, cfg.max_iters)}
    return sorted(quarters)


def _seed_worker(cfg: ExperimentConfig, seed: int, out_dir: str | None):
    t0 = time.perf_counter()
    trace, obj = run_once(cfg, seed)
    wall = time.perf_counter() - t0
    if out_dir is not None:
        path = os.path.join(out_dir, f"trace_seed{seed}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(_trace_rows(trace)) + "\n")
    f_star = obj.smoothness.f_star
    final_gap = None if f_star is None else trace.final_state.f_z - f_star
    contraction = r_squared = None
    if f_star is not None and len(trace.records) >= 12 and final_gap >= 0.0:
        try:
            fit = diagnostics.fit_linear_rate(trace, f_star)
            contraction, r_squared = fit.rate, fit.r_squared
        except ValueError:
            pass
    gaps = None
    grad_means = None
    if cfg.theorem is not None:
        ks = _checkpoints(cfg)
        if cfg.theorem in ("NC", "IS-NC"):
            grad_means = [_grad_running_mean(trace, k) for k in ks]
        else:
            gaps = [_gap_at(trace, f_star, k) for k in ks]
    result = SeedResult(
        seed=seed,
        iterations=len(trace.records),
        evals=trace.records[-1].evals_cumulative if trace.records else obj.eval_counter,
        stop_reason=trace.stop_reason,
        final_gap=final_gap,
        contraction=contraction,
        r_squared=r_squared,
        envelope_ok=None,
        wall_time=wall,
    )
    return result, gaps, grad_means


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None,
                   jobs: int | None = None, write: bool = True) -> RunSummary:
    """Run every seed of a config, write trace CSVs and a summary.

    Returns a RunSummary; envelope_ok is None when no theorem is configured,
    otherwise the seed-mean trajectory is compared against 1.05 x envelope
    at the checkpoints.
    """
    if write:
        base = out_dir or cfg.out or os.environ.get(ENV_OUT) or DEFAULT_OUT
        target = os.path.join(base, cfg.label)
        os.makedirs(target, exist_ok=True)
    else:
        target = None
    jobs = jobs if jobs is not None else cfg.jobs

    envelope = None
    ks = None
    if cfg.theorem is not None:
        obj = build_objective(cfg, cfg.seeds[0])
        x0 = build_x0(cfg, obj.dimension)
        if cfg.method == "smtp_is":
            p, w = build_is_vectors(cfg, obj)
            schedule = build_schedule(cfg, obj, x0, p=p, w=w)
            params = _envelope_params(cfg, obj, x0, None, p, w, schedule)
        else:
            dist = build_distribution(cfg, obj.dimension)
            nc = directions.constants(dist)
            schedule = build_schedule(cfg, obj, x0, norm_constants=nc)
            params = _envelope_params(cfg, obj, x0, nc, None, None, schedule)
        ks = _checkpoints(cfg)
        envelope = diagnostics.bound_envelope(cfg.theorem, params, cfg.max_iters)

    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            payloads = list(pool.map(_seed_worker, [cfg] * len(cfg.seeds), cfg.seeds,
                                     [target] * len(cfg.seeds)))
    else:
        payloads = [_seed_worker(cfg, seed, target) for seed in cfg.seeds]

    results = [p[0] for p in payloads]
    envelope_ok = None
    if envelope is not None:
        tol = 1.05
        series = np.array([p[2] if cfg.theorem in ("NC", "IS-NC") else p[1] for p in payloads])
        means = series.mean(axis=0)
        bounds = envelope.values[list(ks)]
        envelope_ok = bool(np.all(means <= tol * bounds))
        for result, row in zip(results, series):
            result.envelope_ok = bool(np.all(row <= tol * bounds))

    summary = RunSummary(cfg.label, cfg.fingerprint(), results, envelope_ok, target)
    if write:
        _write_summary(summary, cfg, target)
    return summary


def _write_summary(summary: RunSummary, cfg: ExperimentConfig, out_dir: str) -> None:
    lines = [
        f"label={summary.label}",
        f"fingerprint={summary.fingerprint}",
        f"method={cfg.method}",
        f"objective={cfg.objective}",
        f"n_seeds={len(summary.seed_results)}",
        f"envelope={_verdict(summary.envelope_ok)}",
    ]
    for r in summary.seed_results:
        prefix = f"seed{r.seed}"
        lines.append(f"{prefix}.iterations={r.iterations}")
        lines.append(f"{prefix}.evals={r.evals}")
        lines.append(f"{prefix}.stop={r.stop_reason}")
        lines.append(f"{prefix}.final_gap={_format(r.final_gap)}")
        lines.append(f"{prefix}.contraction={_format(r.contraction)}")
        lines.append(f"{prefix}.r_squared={_format(r.r_squared)}")
        lines.append(f"{prefix}.envelope={_verdict(r.envelope_ok)}")
        lines.append(f"{prefix}.wall_time={r.wall_time:.6f}")
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _verdict(ok: bool | None) -> str:
    if ok is None:
        return "none"
    return "pass" if ok else "fail"


def _objective_signature(cfg: ExperimentConfig) -> tuple:
    return (cfg.objective, cfg.dimension, cfg.coord_L, cfg.shift, cfg.horizon,
            cfg.d_state, cfg.d_ctrl, cfg.noise_sigma, cfg.noise_obs,
            cfg.x0, cfg.x0_scale)


def compare_methods(configs: list[ExperimentConfig], out_dir: str | None = None) -> list[dict]:
    """Evaluations-to-target table across configs sharing one objective.

    Every config must declare the same objective block and the same epsilon
    (the gap target).  Rows report median/min/max evaluations over seeds;
    seeds that never reach the target count as inf.
    """
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    sig = _objective_signature(configs[0])
    for cfg in configs[1:]:
        if _objective_signature(cfg) != sig:
            raise ValueError("mismatched objectives: compare needs a shared objective block")
    eps = configs[0].epsilon
    if eps is None or any(cfg.epsilon != eps for cfg in configs):
        raise ValueError("compare needs the same epsilon target in every config")

    rows = []
    for cfg in configs:
        evals = []
        reached = 0
        for seed in cfg.seeds:
            trace, obj = run_once(cfg, seed)
            f_star = obj.smoothness.f_star
            if f_star is None:
                raise ValueError("compare needs objectives with known f_star")
            hit = math.inf
            for rec in trace.records:
                if rec.f_z_after - f_star <= eps:
                    hit = rec.evals_cumulative
                    break
            if math.isfinite(hit):
                reached += 1
            evals.append(hit)
        evals_arr = np.asarray(evals, dtype=float)
        rows.append({
            "label": cfg.label,
            "n_seeds": len(cfg.seeds),
            "n_reached": reached,
            "median_evals": float(np.median(evals_arr)),
            "min_evals": float(np.min(evals_arr)),
            "max_evals": float(np.max(evals_arr)),
        })

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        lines = ["label,n_seeds,n_reached,median_evals,min_evals,max_evals"]
        for row in rows:
            lines.append(
                f"{row['label']},{row['n_seeds']},{row['n_reached']},"
                f"{_num(row['median_evals'])},{_num(row['min_evals'])},{_num(row['max_evals'])}")
        with open(os.path.join(out_dir, "compare.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return rows


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if float(x).is_integer():
        return str(int(x))
    return format(x, ".17g")
