"""Search-direction distributions, their norm constants, and MC validation.

Each distribution comes with two scalars used by the stepsize rules and rate
envelopes: gamma_d = E ||s||_2^2 and mu_d, a lower bound on E |<g, s>| in
units of a distribution-specific norm of g.  The sphere's mu_d is an
asymptotic lower bound and is therefore only validated one-sided; the other
kinds are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("sphere", "gaussian", "coord_uniform", "coord_weighted", "orthonormal_weighted")

L2 = "L2"
L1 = "L1"
WEIGHTED_L1 = "WeightedL1"

_WEIGHT_TOL = 1e-12
_BASIS_TOL = 1e-10


def _check_weights(weights: np.ndarray, dim: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (dim,):
        raise ValueError(f"weights must have shape ({dim},), got {w.shape}")
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    total = float(np.sum(w))
    if abs(total - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"weights must sum to 1 within {_WEIGHT_TOL}, got {total!r}")
    return w


@dataclass(frozen=True)
class DirectionDistribution:
    """A sampling law over search directions in R^dim.

    kind is one of: sphere (uniform on the unit sphere), gaussian
    (N(0, I/dim)), coord_uniform (uniform signed-free coordinate vectors),
    coord_weighted (coordinate vectors drawn with probabilities `weights`),
    orthonormal_weighted (columns of `basis` drawn with `weights`).
    """

    kind: str
    dim: int
    weights: np.ndarray | None = None
    basis: np.ndarray | None = None
    cdf: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown direction kind {self.kind!r}, expected one of {KINDS}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind in ("coord_weighted", "orthonormal_weighted"):
            if self.weights is None:
                raise ValueError(f"{self.kind} requires weights")
            w = _check_weights(self.weights, self.dim)
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "cdf", np.cumsum(w))
        elif self.weights is not None:
            raise ValueError(f"{self.kind} does not take weights")
        if self.kind == "orthonormal_weighted":
            if self.basis is None:
                raise ValueError("orthonormal_weighted requires a basis")
            b = np.asarray(self.basis, dtype=float)
            if b.shape != (self.dim, self.dim):
                raise ValueError(f"basis must have shape ({self.dim},{self.dim}), got {b.shape}")
            err = float(np.max(np.abs(b.T @ b - np.eye(self.dim))))
            if err > _BASIS_TOL:
                raise ValueError(f"basis is not orthonormal (max |B'B - I| = {err:.3g})")
            object.__setattr__(self, "basis", b)
        elif self.basis is not None:
            raise ValueError(f"{self.kind} does not take a basis")


@dataclass(frozen=True)
class DistributionConstants:
    """Norm constants of a direction law.

    gamma_d = E ||s||_2^2.  mu_d lower-bounds E |<g, s>| / d_norm(g).
    norm_tag selects the norm d_norm measures g in; weights/basis carry the
    data the weighted norms need.
    """

    gamma_d: float
    mu_d: float
    norm_tag: str
    weights: np.ndarray | None = None
    basis: np.ndarray | None = None
    exact: bool = True


def constants(dist: DirectionDistribution) -> DistributionConstants:
    """Closed-form constants for each supported kind."""
    d = dist.dim
    if dist.kind == "sphere":
        # asymptotic lower bound, not the exact expectation; validated one-sided
        return DistributionConstants(1.0, 1.0 / math.sqrt(2.0 * math.pi * d), L2, exact=False)
    if dist.kind == "gaussian":
        return DistributionConstants(1.0, math.sqrt(2.0) / math.sqrt(d * math.pi), L2)
    if dist.kind == "coord_uniform":
        return DistributionConstants(1.0, 1.0 / d, L1)
    if dist.kind == "coord_weighted":
        return DistributionConstants(1.0, 1.0, WEIGHTED_L1, weights=dist.weights)
    if dist.kind == "orthonormal_weighted":
        return DistributionConstants(1.0, 1.0, WEIGHTED_L1, weights=dist.weights, basis=dist.basis)
    raise ValueError(f"unknown kind {dist.kind!r}")


def categorical_index(cdf: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: smallest i with u < cdf[i]."""
    i = int(np.searchsorted(cdf, u, side="right"))
    return min(i, len(cdf) - 1)


def sample(dist: DirectionDistribution, rng: np.random.Generator) -> np.ndarray:
    """Draw one direction. Identical rng state gives identical draws."""
    d = dist.dim
    if dist.kind == "sphere":
        g = rng.standard_normal(d)
        return g / math.sqrt(g @ g)
    if dist.kind == "gaussian":
        return rng.standard_normal(d) / math.sqrt(d)
    if dist.kind == "coord_uniform":
        s = np.zeros(d)
        s[int(rng.integers(d))] = 1.0
        return s
    if dist.kind == "coord_weighted":
        s = np.zeros(d)
        s[categorical_index(dist.cdf, rng.random())] = 1.0
        return s
    if dist.kind == "orthonormal_weighted":
        return dist.basis[:, categorical_index(dist.cdf, rng.random())].copy()
    raise ValueError(f"unknown kind {dist.kind!r}")


def d_norm(c: DistributionConstants, g: np.ndarray) -> float:
    """Norm of g matching the distribution's alignment bound."""
    g = np.asarray(g, dtype=float)
    if c.norm_tag == L2:
        return float(np.linalg.norm(g))
    if c.norm_tag == L1:
        return float(np.sum(np.abs(g)))
    if c.norm_tag == WEIGHTED_L1:
        comp = g if c.basis is None else c.basis.T @ g
        return float(np.dot(c.weights, np.abs(comp)))
    raise ValueError(f"unknown norm tag {c.norm_tag!r}")


def dual_norm(c: DistributionConstants, x: np.ndarray) -> float:
    """Dual of d_norm: L2 -> L2, L1 -> Linf, weighted L1 -> max |x_i| / p_i."""
    x = np.asarray(x, dtype=float)
    if c.norm_tag == L2:
        return float(np.linalg.norm(x))
    if c.norm_tag == L1:
        return float(np.max(np.abs(x)))
    if c.norm_tag == WEIGHTED_L1:
        comp = x if c.basis is None else c.basis.T @ x
        return float(np.max(np.abs(comp) / c.weights))
    raise ValueError(f"unknown norm tag {c.norm_tag!r}")


@dataclass(frozen=True)
class MCValidation:
    n_samples: int
    gamma_hat: float
    inner_hat: float
    d_norm_g: float
    mu_lower_ok: bool


_CHUNK = 1 << 16


def mc_validate(
    dist: DirectionDistribution,
    g: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> MCValidation:
    """Monte-Carlo check of gamma_d and the alignment lower bound.

    Estimates E ||s||_2^2 and E |<g, s>| over n_samples draws and reports
    whether inner_hat >= mu_d * d_norm(g) * (1 - 3/sqrt(n_samples)).
    Requires n_samples >= 10^4 and a nonzero g.
    """
    g = np.asarray(g, dtype=float)
    if n_samples < 10_000:
        raise ValueError("mc_validate needs n_samples >= 10000")
    if not np.any(g != 0.0):
        raise ValueError("g must be nonzero")
    c = constants(dist)
    d = dist.dim

    gamma_sum = 0.0
    inner_sum = 0.0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        if dist.kind == "sphere":
            block = rng.standard_normal((n, d))
            block /= np.sqrt(np.einsum("ij,ij->i", block, block))[:, None]
            gamma_sum += float(np.sum(np.einsum("ij,ij->i", block, block)))
            inner_sum += float(np.sum(np.abs(block @ g)))
        elif dist.kind == "gaussian":
            block = rng.standard_normal((n, d)) / math.sqrt(d)
            gamma_sum += float(np.sum(np.einsum("ij,ij->i", block, block)))
            inner_sum += float(np.sum(np.abs(block @ g)))
        elif dist.kind == "coord_uniform":
            idx = rng.integers(d, size=n)
            gamma_sum += float(n)
            inner_sum += float(np.sum(np.abs(g[idx])))
        elif dist.kind == "coord_weighted":
            idx = np.minimum(np.searchsorted(dist.cdf, rng.random(n), side="right"), d - 1)
            gamma_sum += float(n)
            inner_sum += float(np.sum(np.abs(g[idx])))
        elif dist.kind == "orthonormal_weighted":
            idx = np.minimum(np.searchsorted(dist.cdf, rng.random(n), side="right"), d - 1)
            proj = dist.basis.T @ g
            col_sq = np.sum(dist.basis * dist.basis, axis=0)
            gamma_sum += float(np.sum(col_sq[idx]))
            inner_sum += float(np.sum(np.abs(proj[idx])))
        else:
            raise ValueError(f"unknown kind {dist.kind!r}")
        done += n

    gamma_hat = gamma_sum / n_samples
    inner_hat = inner_sum / n_samples
    gnorm = d_norm(c, g)
    ok = inner_hat >= c.mu_d * gnorm * (1.0 - 3.0 / math.sqrt(n_samples))
    return MCValidation(n_samples, gamma_hat, inner_hat, gnorm, ok)


def from_config(kind: str, dim: int, weights=None, basis=None) -> DirectionDistribution:
    """Build a distribution from config-level values (lists accepted)."""
    w = None if weights is None else np.asarray(weights, dtype=float)
    b = None if basis is None else np.asarray(basis, dtype=float)
    return DirectionDistribution(kind, dim, weights=w, basis=b)
