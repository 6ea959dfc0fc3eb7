"""Linear function approximation over state-action features.

A feature map assigns each state-action pair a row phi(s, a) in R^d, stacked
into the (n_sa, d) matrix Phi with full column rank. Approximate Q-vectors
live in the span of Phi's columns. Projections are taken in the weighted l2
geometry whose weights are the stationary state-action frequencies of the
behavior policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mdp import Mdp, bellman_opt, check_q, check_sufficient_exploration, validate_policy


@dataclass
class FeatureMap:
    """Feature matrix wrapper.

    Attributes:
        phi: float64 array of shape (n_sa, d), full column rank, finite entries.
        normalized: True when rows were rescaled so the largest row l1 norm is 1.
    """

    phi: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.phi = np.ascontiguousarray(self.phi, dtype=np.float64)
        if self.phi.ndim != 2 or self.phi.shape[0] < 1 or self.phi.shape[1] < 1:
            raise ValueError("phi must be a non-empty 2d matrix")
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("phi entries must be finite")
        if self.phi.shape[1] > self.phi.shape[0]:
            raise ValueError("phi cannot have more columns than rows")
        if np.linalg.matrix_rank(self.phi) < self.phi.shape[1]:
            raise ValueError("phi must have full column rank")

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    @property
    def n_sa(self) -> int:
        return self.phi.shape[0]


def normalize_features(fm: FeatureMap) -> FeatureMap:
    """Rescale the whole matrix so the largest row l1 norm becomes 1."""
    scale = float(np.abs(fm.phi).sum(axis=1).max())
    return FeatureMap(phi=fm.phi / scale, normalized=True)


@dataclass
class StateActionWeights:
    """Strictly positive weights over state-action pairs, summing to 1."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.ndim != 1:
            raise ValueError("weights must be a vector")
        if np.any(self.w <= 0.0):
            raise ValueError("weights must be strictly positive")
        if abs(float(self.w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


def weights_from(mdp: Mdp, policy: np.ndarray) -> StateActionWeights:
    """Stationary state-action frequencies mu(s) * policy(a | s) of a behavior
    policy that explores sufficiently."""
    policy = validate_policy(mdp, policy)
    mu = check_sufficient_exploration(mdp, policy)
    w = (mu[:, None] * policy).reshape(mdp.n_sa)
    return StateActionWeights(w=w)


def gram_and_lambda_min(fm: FeatureMap, weights: StateActionWeights):
    """Weighted Gram matrix Phi^T diag(w) Phi and its smallest eigenvalue.

    The Gram matrix is symmetric positive definite whenever phi has full
    column rank and the weights are positive; a Cholesky factorization
    certifies this before the eigensolve.
    """
    if weights.w.shape[0] != fm.n_sa:
        raise ValueError("weights and feature map disagree on n_sa")
    gram = fm.phi.T @ (weights.w[:, None] * fm.phi)
    gram = 0.5 * (gram + gram.T)
    try:
        np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Gram matrix is not positive definite") from exc
    lam_min = float(np.linalg.eigvalsh(gram)[0])
    return gram, lam_min


def projection_coefficients(q: np.ndarray, fm: FeatureMap, weights: StateActionWeights) -> np.ndarray:
    """Coefficients theta of the weighted l2 projection of q onto span(Phi)."""
    q = np.asarray(q, dtype=np.float64)
    gram, _ = gram_and_lambda_min(fm, weights)
    return np.linalg.solve(gram, fm.phi.T @ (weights.w * q))


def project_span(q: np.ndarray, fm: FeatureMap, weights: StateActionWeights) -> np.ndarray:
    """Weighted l2 projection of a Q-vector onto the feature span.

    Idempotent, and non-expansive in the weighted l2 norm.
    """
    return fm.phi @ projection_coefficients(q, fm, weights)


def truncate(x: np.ndarray, radius: float):
    """Clamp every component to [-radius, radius].

    Works on scalars and arrays; 1-Lipschitz in the sup norm, and the identity
    on inputs already inside the box.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return np.clip(x, -radius, radius)


def weighted_lp_norm(x: np.ndarray, weights: np.ndarray, p: float) -> float:
    """||x||_{w,p} = (sum_i w_i |x_i|^p)^(1/p), with max_i w_i |x_i| at p = inf."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    if np.isinf(p):
        return float((weights * x).max())
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((weights * x**p).sum() ** (1.0 / p))


def truncation_projection_margins(
    x: np.ndarray,
    radius: float,
    weights: np.ndarray,
    p: float,
    n_random: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Margins ||x - y|| - ||x - truncate(x)|| in the weighted lp norm, over
    sampled y inside the radius box plus boundary candidates.

    Non-negative margins mean truncation is a metric projection onto the box
    in that norm.
    """
    x = np.asarray(x, dtype=np.float64)
    tx = truncate(x, radius)
    base = weighted_lp_norm(x - tx, weights, p)
    candidates = [tx, np.full_like(x, radius), np.full_like(x, -radius), radius * np.sign(x)]
    if n_random > 0:
        candidates.append(rng.uniform(-radius, radius, size=(n_random, x.shape[0])))
    ys = np.vstack([np.atleast_2d(c) for c in candidates])
    return np.array([weighted_lp_norm(x - y, weights, p) - base for y in ys])


def truncation_is_projection_check(
    x: np.ndarray,
    radius: float,
    weights: np.ndarray,
    p: float,
    n_random: int,
    rng: np.random.Generator,
    tol: float = 1e-12,
) -> bool:
    """True when no sampled point of the box beats truncate(x) as a weighted
    lp approximation of x (up to a tiny float tolerance)."""
    margins = truncation_projection_margins(x, radius, weights, p, n_random, rng)
    return bool(margins.min() >= -tol)


def approx_error_estimate(
    mdp: Mdp,
    fm: FeatureMap,
    weights: StateActionWeights,
    radius: float,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Sampled estimate of the worst truncated-projection residual

        sup { ||truncate(project(H q)) - H q||_inf : q in span(Phi), ||q||_inf <= radius }

    The sup is lower-bounded by sampling: coefficient vectors are proposed
    uniformly in a per-coordinate box sized from the largest feature column
    entries and rejected unless ||Phi theta||_inf <= radius. The candidate set
    always includes theta = 0 and the fixed point of the truncated map when
    iteration finds one. A sampled sup is an estimate, not a certificate.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    gram, _ = gram_and_lambda_min(fm, weights)
    col_scale = np.abs(fm.phi).max(axis=0)
    box = radius / np.where(col_scale > 0, col_scale, 1.0)

    def residual(theta: np.ndarray) -> float:
        hq = bellman_opt(mdp, fm.phi @ theta)
        proj = fm.phi @ np.linalg.solve(gram, fm.phi.T @ (weights.w * hq))
        return float(np.abs(truncate(proj, radius) - hq).max())

    best = residual(np.zeros(fm.d))
    q_fp = _truncated_span_fixed_point(mdp, fm, weights, radius, gram)
    if q_fp is not None:
        theta_fp = np.linalg.solve(gram, fm.phi.T @ (weights.w * q_fp))
        reach = float(np.abs(fm.phi @ theta_fp).max())
        if reach > radius:
            theta_fp = theta_fp * (radius / reach)
        best = max(best, residual(theta_fp))
    accepted = 0
    proposals = 0
    while accepted < n_samples:
        theta = rng.uniform(-box, box)
        proposals += 1
        if float(np.abs(fm.phi @ theta).max()) <= radius:
            accepted += 1
            best = max(best, residual(theta))
        elif proposals >= 10**6:
            raise RuntimeError(
                "rejection sampling failed after 1e6 proposals; rescale the radius or features"
            )
    return best


def _truncated_span_fixed_point(mdp, fm, weights, radius, gram, n_iter=500):
    """Iterate q -> truncate(project(H q)) from zero; None when it does not settle."""
    q = np.zeros(fm.n_sa)
    for _ in range(n_iter):
        hq = bellman_opt(mdp, q)
        q_next = truncate(fm.phi @ np.linalg.solve(gram, fm.phi.T @ (weights.w * hq)), radius)
        gap = float(np.abs(q_next - q).max())
        q = q_next
        if gap <= 1e-12:
            return q
    return None


def save_features(fm: FeatureMap, path: str) -> None:
    """Write a feature map as JSON with the matrix row-major by idx(s, a)."""
    payload = {"d": fm.d, "phi": fm.phi.reshape(-1).tolist()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_features(path: str, n_sa: int | None = None) -> FeatureMap:
    with open(path) as fh:
        payload = json.load(fh)
    d = int(payload["d"])
    flat = np.asarray(payload["phi"], dtype=np.float64)
    if flat.size % d != 0:
        raise ValueError("feature payload length is not a multiple of d")
    phi = flat.reshape(-1, d)
    if n_sa is not None and phi.shape[0] != n_sa:
        raise ValueError(f"feature file has {phi.shape[0]} rows, expected {n_sa}")
    return FeatureMap(phi=phi)
