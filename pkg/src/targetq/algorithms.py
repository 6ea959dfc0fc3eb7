"""The three stochastic algorithms under study, all driven by one never-reset
Markovian trajectory of the behavior policy.

* semi_gradient_run: the classical update, bootstrap from the moving
  parameters. Known to diverge off-policy with function approximation.
* target_network_run: outer loop freezes target parameters, inner loop solves
  the induced regression by constant-stepsize SGD from theta = 0. With
  truncation=True the bootstrap values of the frozen target are clamped to
  [-r, r], which is what turns stability into a provable guarantee.
* projection_variant_run: same computation expressed over the explicit
  truncated Q-table of the target; iterate-for-iterate identical to
  target_network_run(truncation=True) by construction, since truncating the
  full vector and reading entries commutes with reading entries and
  truncating scalars.

Divergence is an outcome, not an exception: runs flag `diverged` and halt
when the parameter norm passes the guard or turns non-finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .envs import Environment, default_radius
from .features import gram_and_lambda_min, truncate, weights_from
from .mdp import bellman_opt

# state the single trajectory starts in, at the first outer step only
_START_STATE = 0


@dataclass
class AlgoConfig:
    """Run-shape parameters shared by all three algorithms.

    T: outer steps (target updates). For semi_gradient_run the flat loop runs
        T * K steps total.
    K: inner steps per outer step.
    alpha: constant stepsize, > 0.
    r: truncation radius; None picks max(1, R_max) / (1 - gamma) for the
        environment at run time.
    theta0: initial parameters (scalar broadcast or d-vector); None means zeros.
    divergence_guard: l2 norm level that flags a run as diverged.
    log_every: record cadence, in outer steps (target runs) or in single
        steps (semi-gradient). Terminal and divergence rows always log.

    T = 0 or K = 0 degenerate runs are allowed here and emit the initial
    record only; the experiment harness requires T, K >= 1.
    """

    T: int
    K: int
    alpha: float
    r: float | None = None
    seed: int = 0
    theta0: float | np.ndarray | None = None
    divergence_guard: float = 1e8
    log_every: int = 1

    def __post_init__(self):
        if self.T < 0 or self.K < 0:
            raise ValueError("T and K must be non-negative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.r is not None and self.r < 0:
            raise ValueError("truncation radius must be non-negative")
        if self.divergence_guard <= 0:
            raise ValueError("divergence_guard must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")


@dataclass
class RunRecord:
    t: int
    samples: int
    sup_error: float
    theta_norm: float
    diverged: bool


@dataclass
class RunLog:
    """Metrics of one run: per-step records plus the terminal parameters.

    boundary_states holds the trajectory state at the start of the run and
    after every outer step (or chunk), witnessing that the single trajectory
    is never reset. inner_thetas (capture_inner only) holds the full inner
    iterate sequence per outer step. inner_gaps (track_inner_gaps only) holds
    per outer step the sup distance between the new target Q-vector and the
    exact truncated-projected Bellman image of the previous one.
    """

    env_name: str
    algo: str
    seed: int
    records: list[RunRecord] = field(default_factory=list)
    theta_final: np.ndarray | None = None
    boundary_states: list[int] = field(default_factory=list)
    inner_thetas: list[np.ndarray] = field(default_factory=list)
    inner_gaps: list[float] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return bool(self.records and self.records[-1].diverged)

    def to_rows(self, run_id: int) -> list[tuple]:
        return [
            (run_id, self.env_name, self.algo, self.seed, rec.t, rec.samples, rec.sup_error,
             rec.theta_norm, int(rec.diverged))
            for rec in self.records
        ]


def _prepared(env: Environment):
    phi = np.ascontiguousarray(env.features.phi)
    rewards = np.ascontiguousarray(env.mdp.rewards)
    cum_pi = np.ascontiguousarray(np.cumsum(env.behavior, axis=1))
    cum_p = np.ascontiguousarray(np.cumsum(env.mdp.transitions, axis=2))
    return phi, rewards, cum_pi, cum_p


def _initial_theta(env: Environment, cfg: AlgoConfig) -> np.ndarray:
    d = env.features.d
    if cfg.theta0 is None:
        return np.zeros(d)
    theta0 = np.asarray(cfg.theta0, dtype=np.float64)
    if theta0.ndim == 0:
        return np.full(d, float(theta0))
    if theta0.shape != (d,):
        raise ValueError(f"theta0 must be a scalar or a ({d},) vector")
    return theta0.copy()


def bootstrap_values(env: Environment, theta_hat: np.ndarray, radius: float | None):
    """Q-vector of the frozen target and the per-state bootstrap table.

    Returns (q_hat, boot) where q_hat = Phi theta_hat clamped to the radius
    box when radius is given, and boot[s] = gamma * max_a q_hat(s, a). Both
    target_network_run and projection_variant_run read bootstrap values from
    this one function, which is what makes their iterates identical.
    """
    q_hat = env.features.phi @ theta_hat
    if radius is not None:
        q_hat = truncate(q_hat, radius)
    boot = env.mdp.gamma * q_hat.reshape(env.mdp.n_states, env.mdp.n_actions).max(axis=1)
    return q_hat, np.ascontiguousarray(boot)


def _sup_error(env: Environment, q_hat: np.ndarray) -> float:
    return float(np.max(np.abs(q_hat - env.q_star)))


def _diverged(theta: np.ndarray, guard: float) -> bool:
    if not np.all(np.isfinite(theta)):
        return True
    return float(np.sqrt(np.sum(theta * theta))) > guard


def _target_engine(
    env: Environment,
    cfg: AlgoConfig,
    truncation: bool,
    algo: str,
    capture_inner: bool,
    track_inner_gaps: bool,
) -> RunLog:
    phi, rewards, cum_pi, cum_p = _prepared(env)
    radius = (cfg.r if cfg.r is not None else default_radius(env)) if truncation else None
    rng = np.random.default_rng(cfg.seed)
    theta_hat = _initial_theta(env, cfg)
    log = RunLog(env_name=env.name, algo=algo, seed=cfg.seed)
    state = _START_STATE
    log.boundary_states.append(state)
    if track_inner_gaps:
        weights = weights_from(env.mdp, env.behavior)
        gram, _ = gram_and_lambda_min(env.features, weights)

    q_hat, boot = bootstrap_values(env, theta_hat, radius)
    if cfg.T == 0 or cfg.K == 0:
        log.records.append(
            RunRecord(t=0, samples=0, sup_error=_sup_error(env, q_hat),
                      theta_norm=float(np.linalg.norm(theta_hat)),
                      diverged=_diverged(theta_hat, cfg.divergence_guard))
        )
        log.theta_final = theta_hat
        return log

    samples = 0
    for t in range(1, cfg.T + 1):
        theta = np.zeros(env.features.d)
        draws = rng.random((cfg.K, 2))
        if capture_inner:
            inner = np.empty((cfg.K, env.features.d))
            for k in range(cfg.K):
                state = _kernels.inner_steps(
                    phi, rewards, cum_pi, cum_p, boot, theta, state, cfg.alpha,
                    draws[k : k + 1, 0].copy(), draws[k : k + 1, 1].copy(),
                )
                inner[k] = theta
            log.inner_thetas.append(inner)
        else:
            state = _kernels.inner_steps(
                phi, rewards, cum_pi, cum_p, boot, theta, state, cfg.alpha,
                np.ascontiguousarray(draws[:, 0]), np.ascontiguousarray(draws[:, 1]),
            )
        samples += cfg.K
        log.boundary_states.append(state)
        prev_q_hat = q_hat
        theta_hat = theta
        q_hat, boot = bootstrap_values(env, theta_hat, radius)
        if track_inner_gaps:
            # distance between the realized target and the exact deterministic
            # image truncate(project(H(prev))) of the previous target
            hq = bellman_opt(env.mdp, prev_q_hat)
            image = env.features.phi @ np.linalg.solve(
                gram, env.features.phi.T @ (weights.w * hq)
            )
            if radius is not None:
                image = truncate(image, radius)
            log.inner_gaps.append(float(np.max(np.abs(q_hat - image))))
        diverged = _diverged(theta_hat, cfg.divergence_guard)
        if t % cfg.log_every == 0 or t == cfg.T or diverged:
            log.records.append(
                RunRecord(t=t, samples=samples, sup_error=_sup_error(env, q_hat),
                          theta_norm=float(np.linalg.norm(theta_hat)), diverged=diverged)
            )
        if diverged:
            break
    log.theta_final = theta_hat
    return log


def target_network_run(
    env: Environment,
    cfg: AlgoConfig,
    truncation: bool,
    capture_inner: bool = False,
    track_inner_gaps: bool = False,
) -> RunLog:
    """Target-network run: T outer steps; each freezes theta_hat, precomputes
    its (optionally truncated) bootstrap table, and runs K constant-stepsize
    inner steps from theta = 0 along the continuing trajectory. The inner
    result becomes the next target.

    sup_error logs ||truncate(Phi theta_hat) - Q*||_inf with truncation on,
    ||Phi theta_hat - Q*||_inf without.
    """
    algo = "target_trunc" if truncation else "target"
    return _target_engine(env, cfg, truncation, algo, capture_inner, track_inner_gaps)


def projection_variant_run(
    env: Environment, cfg: AlgoConfig, capture_inner: bool = False
) -> RunLog:
    """Truncated target-network run phrased over the explicit Q-table: the
    target is stored as the full truncated vector Q~ = truncate(Phi theta_hat)
    and bootstrap values are read from it. Numerically identical, iterate for
    iterate, to target_network_run with truncation=True."""
    log = _target_engine(env, cfg, True, "target_proj", capture_inner, False)
    return log


def semi_gradient_run(env: Environment, cfg: AlgoConfig) -> RunLog:
    """Classical semi-gradient Q-learning: one flat loop of T * K steps,
    bootstrap re-evaluated from the live parameters at every step. Records
    every log_every steps, flags diverged and halts when the parameter norm
    passes the guard."""
    phi, rewards, cum_pi, cum_p = _prepared(env)
    rng = np.random.default_rng(cfg.seed)
    theta = _initial_theta(env, cfg)
    log = RunLog(env_name=env.name, algo="semi_gradient", seed=cfg.seed)
    state = _START_STATE
    log.boundary_states.append(state)
    total = cfg.T * cfg.K
    if total == 0:
        log.records.append(
            RunRecord(t=0, samples=0, sup_error=_sup_error(env, phi @ theta),
                      theta_norm=float(np.linalg.norm(theta)),
                      diverged=_diverged(theta, cfg.divergence_guard))
        )
        log.theta_final = theta
        return log
    done = 0
    chunk_index = 0
    while done < total:
        chunk = min(cfg.log_every, total - done)
        draws = rng.random((chunk, 2))
        state = _kernels.semi_gradient_steps(
            phi, rewards, cum_pi, cum_p, env.mdp.gamma, theta, state, cfg.alpha,
            np.ascontiguousarray(draws[:, 0]), np.ascontiguousarray(draws[:, 1]),
        )
        done += chunk
        chunk_index += 1
        log.boundary_states.append(state)
        diverged = _diverged(theta, cfg.divergence_guard)
        with np.errstate(invalid="ignore", over="ignore"):
            err = _sup_error(env, phi @ theta)
            nrm = float(np.linalg.norm(theta))
        log.records.append(
            RunRecord(t=chunk_index, samples=done, sup_error=err, theta_norm=nrm, diverged=diverged)
        )
        if diverged:
            break
    log.theta_final = theta
    return log
