"""Deterministic maps, fixed points, drift diagnostics, and error-bound
formulas that serve as exact baselines for the stochastic algorithms.

Everything here is small dense linear algebra: these functions are meant to be
trusted references that the sampled runs are compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMap, StateActionWeights, gram_and_lambda_min, truncate
from .mdp import ConvergenceFailure, Mdp, bellman_opt


def projected_bellman_map(
    theta: np.ndarray, mdp: Mdp, fm: FeatureMap, weights: StateActionWeights
) -> np.ndarray:
    """Coefficient-space composition of the Bellman optimality operator with
    the weighted projection onto the feature span:

        theta -> (Phi^T D Phi)^{-1} Phi^T D H(Phi theta)

    With a complete basis its fixed point is Phi^{-1} Q*; with an incomplete
    one it can be expansive and have no fixed point at all.
    """
    theta = np.asarray(theta, dtype=np.float64)
    gram, _ = gram_and_lambda_min(fm, weights)
    hq = bellman_opt(mdp, fm.phi @ theta)
    return np.linalg.solve(gram, fm.phi.T @ (weights.w * hq))


def two_state_map(theta: float, gamma: float) -> float:
    """Closed form of projected_bellman_map on the two_state environment with
    uniform behavior (weights 1/4, Gram 25/4):

        theta >= 0:  1 + (6/5) gamma theta     (expansive when gamma > 5/6)
        theta  < 0:  1 + (3/5) gamma theta

    Derivation: H(Phi theta) = (1, 2, 2, 4) + gamma * (m1, m2, m1, m2) with
    m1 = max(theta, 2 theta), m2 = max(2 theta, 4 theta), and the projection
    coefficient is (1/25) * (1, 2, 2, 4) . H(Phi theta).
    """
    if theta >= 0:
        return 1.0 + 1.2 * gamma * theta
    return 1.0 + 0.6 * gamma * theta


def truncated_projected_bellman_map(
    q: np.ndarray, mdp: Mdp, fm: FeatureMap, weights: StateActionWeights, radius: float
) -> np.ndarray:
    """One step of q -> truncate(project(H q)). Maps the radius box into
    itself, so a fixed point exists; uniqueness is not guaranteed."""
    gram, _ = gram_and_lambda_min(fm, weights)
    hq = bellman_opt(mdp, np.asarray(q, dtype=np.float64))
    proj = fm.phi @ np.linalg.solve(gram, fm.phi.T @ (weights.w * hq))
    return truncate(proj, radius)


@dataclass
class MapIterates:
    """Trajectory of a deterministic map, halted early on guard breach."""

    points: list
    diverged: bool

    @property
    def final(self):
        return self.points[-1]


def iterate_map(map_fn, x0, n_iter: int, divergence_guard: float = 1e8) -> MapIterates:
    """Iterate x -> map_fn(x) for n_iter steps, recording every iterate.

    Sets diverged and stops as soon as the sup norm passes the guard or a
    non-finite value appears. Works for scalar- and vector-valued maps.
    """
    x = x0
    points = [x0]
    diverged = False
    for _ in range(n_iter):
        x = map_fn(x)
        points.append(x)
        mag = float(np.max(np.abs(x)))
        if not math.isfinite(mag) or mag > divergence_guard:
            diverged = True
            break
    return MapIterates(points=points, diverged=diverged)


@dataclass
class TruncatedFixedPoint:
    """Fixed point of the truncated projected Bellman map.

    q satisfies q = truncate(project(H q)); theta is the coefficient vector
    of the span element being truncated, i.e. phi @ theta = project(H q) and
    truncate(phi @ theta) = q. This is the value the target-network weights
    settle at, so it is the right comparison point for stochastic runs.
    random_starts_agree reports whether iteration from 5 random points in the
    box landed on the same fixed point (the map need not be a contraction, so
    disagreement is possible and worth surfacing).
    """

    q: np.ndarray
    theta: np.ndarray
    converged: bool
    random_starts_agree: bool
    max_start_gap: float


def truncated_fixed_point(
    mdp: Mdp,
    fm: FeatureMap,
    weights: StateActionWeights,
    radius: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    rng: np.random.Generator | None = None,
    n_starts: int = 5,
) -> TruncatedFixedPoint:
    """Fixed point of q -> truncate(project(H q)) by plain iteration from 0,
    cross-checked from random starts inside the box."""
    gram, _ = gram_and_lambda_min(fm, weights)

    def step(q):
        hq = bellman_opt(mdp, q)
        return truncate(fm.phi @ np.linalg.solve(gram, fm.phi.T @ (weights.w * hq)), radius)

    def settle(q):
        for _ in range(max_iter):
            q_next = step(q)
            gap = float(np.abs(q_next - q).max())
            q = q_next
            if gap <= tol:
                return q, True
        return q, False

    q0, converged = settle(np.zeros(fm.n_sa))
    # coefficients of project(H q0), whose truncation is q0 itself
    theta = np.linalg.solve(gram, fm.phi.T @ (weights.w * bellman_opt(mdp, q0)))
    rng = rng if rng is not None else np.random.default_rng(0)
    max_gap = 0.0
    for _ in range(n_starts):
        q_alt, ok = settle(rng.uniform(-radius, radius, fm.n_sa))
        if ok:
            max_gap = max(max_gap, float(np.abs(q_alt - q0).max()))
    agree = max_gap <= max(100 * tol, 1e-7)
    return TruncatedFixedPoint(
        q=q0, theta=theta, converged=converged, random_starts_agree=agree, max_start_gap=max_gap
    )


def contraction_modulus_estimate(
    map_fn,
    dim: int,
    n_pairs: int,
    rng: np.random.Generator,
    norm: str = "sup",
    fm: FeatureMap | None = None,
    weights: StateActionWeights | None = None,
    box: float = 10.0,
) -> float:
    """Largest sampled ratio ||f(x) - f(y)|| / ||x - y|| over random pairs
    drawn from [-box, box]^dim. A lower bound on the true Lipschitz modulus.

    norm selects the metric: "sup" for the plain sup norm, "phi_sup" for
    ||Phi v||_inf (requires fm), "weighted_l2" for sqrt(sum w (Phi v)^2)
    (requires fm and weights).
    """
    if norm == "sup":
        measure = lambda v: float(np.max(np.abs(v)))
    elif norm == "phi_sup":
        if fm is None:
            raise ValueError("phi_sup norm needs a feature map")
        measure = lambda v: float(np.max(np.abs(fm.phi @ v)))
    elif norm == "weighted_l2":
        if fm is None or weights is None:
            raise ValueError("weighted_l2 norm needs a feature map and weights")
        measure = lambda v: float(np.sqrt(np.sum(weights.w * (fm.phi @ v) ** 2)))
    else:
        raise ValueError(f"unknown norm tag {norm!r}")
    worst = 0.0
    for _ in range(n_pairs):
        while True:
            x = rng.uniform(-box, box, dim)
            y = rng.uniform(-box, box, dim)
            dist = measure(x - y)
            if dist > 1e-12:
                break
        worst = max(worst, measure(np.asarray(map_fn(x)) - np.asarray(map_fn(y))) / dist)
    return worst


@dataclass
class DriftWitness:
    theta: np.ndarray
    lhs: float
    rhs: float
    kind: str


@dataclass
class DriftReport:
    """Outcome of checking the negative-drift inequality

        2 gamma^2 E_mu[(max_a phi(S, a)^T theta)^2] < E_{mu, pi}[(phi(S, A)^T theta)^2]

    for random directions and structured single-pair witnesses. satisfied is
    False as soon as one direction violates it (lhs >= rhs).
    """

    satisfied: bool
    checked: int
    violations: list[DriftWitness] = field(default_factory=list)


def negative_drift_check(
    mdp: Mdp,
    fm: FeatureMap,
    policy: np.ndarray,
    mu: np.ndarray,
    n_random: int,
    rng: np.random.Generator,
) -> DriftReport:
    """Check the stepwise stability condition for semi-gradient updates.

    Both expectations are computed exactly as weighted sums. Structured
    witnesses take, for each state-action pair, the component of its feature
    row orthogonal to all other rows (when nonzero); for such theta the
    right side reduces to the single pair's term, which makes violations easy
    to exhibit. For a complete one-hot basis the condition fails exactly when
    2 gamma^2 >= pi(a | s) for some pair.
    """
    gamma = mdp.gamma
    w_sa = (mu[:, None] * policy).reshape(mdp.n_sa)

    def sides(theta):
        vals = (fm.phi @ theta).reshape(mdp.n_states, mdp.n_actions)
        lhs = 2.0 * gamma**2 * float(mu @ (vals.max(axis=1) ** 2))
        rhs = float(w_sa @ (vals.reshape(-1) ** 2))
        return lhs, rhs

    report = DriftReport(satisfied=True, checked=0)

    def record(theta, kind):
        lhs, rhs = sides(theta)
        report.checked += 1
        if lhs >= rhs:
            report.satisfied = False
            report.violations.append(DriftWitness(theta=theta, lhs=lhs, rhs=rhs, kind=kind))

    for i in range(fm.n_sa):
        others = np.delete(fm.phi, i, axis=0)
        _, sv, vt = np.linalg.svd(others)
        rank = int(np.sum(sv > 1e-10 * (sv[0] if sv.size else 1.0)))
        null_basis = vt[rank:].T
        if null_basis.shape[1] == 0:
            continue
        theta = null_basis @ (null_basis.T @ fm.phi[i])
        if float(fm.phi[i] @ theta) > 1e-10:
            record(theta / np.linalg.norm(theta), f"orthogonal-witness-{i}")
    for _ in range(n_random):
        theta = rng.standard_normal(fm.d)
        record(theta / np.linalg.norm(theta), "random")
    return report


@dataclass
class BoundInputs:
    """Plug-in quantities for the finite-sample error bound of the truncated
    target-network run. t_mix is the chain's mixing time at precision alpha;
    init_gap is ||Q_0 - Q*||_inf; approx_error bounds the truncated-projection
    residual over the radius box."""

    gamma: float
    lambda_min: float
    alpha: float
    t_mix: int
    inner_steps: int
    outer_steps: int
    init_gap: float
    approx_error: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.lambda_min <= 0:
            raise ValueError("lambda_min must be positive")
        if self.alpha <= 0 or self.alpha * self.lambda_min >= 1.0:
            raise ValueError("alpha must lie in (0, 1 / lambda_min)")
        if self.t_mix < 0:
            raise ValueError("t_mix must be non-negative")
        if self.inner_steps < self.t_mix + 1:
            raise ValueError("inner_steps must be at least t_mix + 1")
        if self.outer_steps < 0:
            raise ValueError("outer_steps must be non-negative")
        if self.init_gap < 0 or self.approx_error < 0:
            raise ValueError("init_gap and approx_error must be non-negative")


@dataclass
class BoundTerms:
    """The four additive terms of the error bound and their sum.

    decay: contraction of the initial error, gamma^T * init_gap.
    tail: geometric inner-loop tail,
        2 (1 - lambda_min alpha)^((K - t_mix - 1) / 2) / (sqrt(lambda_min) (1 - gamma)^2).
    noise: Markov-noise floor, 24 sqrt(alpha (t_mix + 1)) / (lambda_min (1 - gamma)^2).
    approx: approx_error / (1 - gamma).
    stepsize_ok: whether alpha <= lambda_min (1 - gamma)^2 / 130, the regime
        the guarantee is stated for. The terms are still evaluated when False.
    """

    decay: float
    tail: float
    noise: float
    approx: float
    stepsize_ok: bool

    @property
    def total(self) -> float:
        return self.decay + self.tail + self.noise + self.approx


def finite_sample_bound(inputs: BoundInputs) -> BoundTerms:
    """Evaluate the expected sup-norm error bound for the truncated
    target-network run after T outer and K inner steps."""
    g, lam, a = inputs.gamma, inputs.lambda_min, inputs.alpha
    one_minus_g2 = (1.0 - g) ** 2
    decay = g**inputs.outer_steps * inputs.init_gap
    tail = 2.0 * (1.0 - lam * a) ** ((inputs.inner_steps - inputs.t_mix - 1) / 2.0) / (
        math.sqrt(lam) * one_minus_g2
    )
    noise = 24.0 * math.sqrt(a * (inputs.t_mix + 1)) / (lam * one_minus_g2)
    approx = inputs.approx_error / (1.0 - g)
    stepsize_ok = a <= lam * one_minus_g2 / 130.0
    return BoundTerms(decay=decay, tail=tail, noise=noise, approx=approx, stepsize_ok=stepsize_ok)


def inner_loop_mse_bound(k: int, alpha: float, t_mix: int, lambda_min: float, gamma: float) -> float:
    """Bound on E||theta_k - theta*||_2^2 for one inner loop after k steps:

        4 / (lambda_min (1-gamma)^2) * (1 - lambda_min alpha)^(k - t_mix - 1)
        + 520 alpha (t_mix + 1) / (lambda_min^2 (1-gamma)^2)

    Valid once k >= t_mix + 1.
    """
    if k < t_mix + 1:
        raise ValueError("k must be at least t_mix + 1")
    if alpha <= 0 or alpha * lambda_min >= 1.0:
        raise ValueError("alpha must lie in (0, 1 / lambda_min)")
    one_minus_g2 = (1.0 - gamma) ** 2
    geo = 4.0 / (lambda_min * one_minus_g2) * (1.0 - lambda_min * alpha) ** (k - t_mix - 1)
    floor = 520.0 * alpha * (t_mix + 1) / (lambda_min**2 * one_minus_g2)
    return geo + floor


def modified_bellman_solve(
    mdp: Mdp,
    weights: StateActionWeights,
    eta: float,
    tol: float = 1e-12,
    max_iter: int = 10**6,
) -> np.ndarray:
    """Solve (I + eta D^{-1}) Q = H(Q) by fixed-point iteration.

    D is diagonal with the state-action weights, so the update is the
    entrywise damped Bellman step Q <- H(Q) / (1 + eta / w). For eta >= 0 the
    map contracts at least as fast as H itself; eta = 0 recovers Q*.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    damp = 1.0 / (1.0 + eta / weights.w)
    q = np.zeros(mdp.n_sa)
    for _ in range(max_iter):
        q_next = damp * bellman_opt(mdp, q)
        if float(np.abs(q_next - q).max()) <= tol:
            return q_next
        q = q_next
    raise ConvergenceFailure(f"modified Bellman iteration did not reach tol={tol}")


@dataclass
class CoupledFixedPoint:
    """Result of iterating u -> Phi^T D H(Phi u). v rescales u by the inverse
    Gram matrix. converged is False when the iteration hit max_iter or the
    guard; the last iterate is still reported."""

    u: np.ndarray
    v: np.ndarray
    converged: bool
    iterations: int


def coupled_q_fixed_point(
    mdp: Mdp,
    fm: FeatureMap,
    weights: StateActionWeights,
    tol: float = 1e-12,
    max_iter: int = 10**5,
    divergence_guard: float = 1e12,
) -> CoupledFixedPoint:
    """Fixed point of the two-time-scale update u = Phi^T D H(Phi u), with
    v = (Phi^T D Phi)^{-1} u. With a complete one-hot basis and uniform
    weights 1/n this collapses to a Bellman equation with discount gamma / n
    and rewards scaled by 1 / n: a drastically heavier discount than the
    original MDP, hence a strongly biased baseline."""
    gram, _ = gram_and_lambda_min(fm, weights)
    u = np.zeros(fm.d)
    converged = False
    iterations = 0
    for k in range(max_iter):
        u_next = fm.phi.T @ (weights.w * bellman_opt(mdp, fm.phi @ u))
        gap = float(np.abs(u_next - u).max())
        u = u_next
        iterations = k + 1
        if not np.all(np.isfinite(u)) or float(np.abs(u).max()) > divergence_guard:
            break
        if gap <= tol:
            converged = True
            break
    v = np.linalg.solve(gram, u) if np.all(np.isfinite(u)) else np.full(fm.d, np.nan)
    return CoupledFixedPoint(u=u, v=v, converged=converged, iterations=iterations)
